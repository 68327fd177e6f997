//! Parsing and serialization of MATPOWER-style `.m` case files.
//!
//! Only the subset needed by the DC dispatch model is read: `baseMVA` and the
//! `bus`, `gen`, `branch`, `gencost` matrices. Voltage, reactive and shunt
//! columns are ignored. All MW quantities are converted to per-unit on parse.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    /// Bus number as written in the source file (arbitrary positive integer).
    pub id: usize,
    pub is_slack: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub bus_id: usize,
    /// Dispatch bounds, per-unit.
    pub p_min: f64,
    pub p_max: f64,
    /// Cost per per-unit power (currency / p.u.).
    pub cost_linear: f64,
    /// Quadratic coefficient, parsed but unused by the linear objective.
    pub cost_quadratic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance, per-unit.
    pub reactance: f64,
    /// Flow limit, per-unit; 0 means unlimited.
    pub flow_limit: f64,
    pub in_service: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub bus_id: usize,
    /// Active demand, per-unit.
    pub p_demand: f64,
}

/// Parsed network: the DC-relevant slice of a MATPOWER case.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
    pub loads: Vec<Load>,
}

impl PowerCase {
    pub fn n_bus(&self) -> usize {
        self.buses.len()
    }

    pub fn n_gen(&self) -> usize {
        self.generators.len()
    }

    pub fn n_load(&self) -> usize {
        self.loads.len()
    }

    /// Number of in-service branches.
    pub fn n_line(&self) -> usize {
        self.branches.iter().filter(|b| b.in_service).count()
    }

    pub fn slack_bus_id(&self) -> usize {
        self.buses.iter().find(|b| b.is_slack).expect("validated").id
    }

    /// Map from source bus id to dense index.
    pub fn bus_index(&self) -> HashMap<usize, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    /// Total demand in per-unit (before any load scaling).
    pub fn total_load(&self) -> f64 {
        self.loads.iter().map(|l| l.p_demand).sum()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CaseError> {
        let text = std::fs::read_to_string(&path)?;
        let name = path
            .as_ref()
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "case".into());
        let mut case = Self::parse(&text)?;
        case.name = name;
        Ok(case)
    }

    /// Parse a MATPOWER case from text.
    pub fn parse(source: &str) -> Result<Self, CaseError> {
        let raw = RawCase::scan(source)?;
        raw.into_case()
    }

    /// Emit the case in MATPOWER format (the supported subset; round-trips
    /// through [`PowerCase::parse`]).
    pub fn to_matpower(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        use fmt::Write;
        writeln!(w, "function mpc = {}", self.name).unwrap();
        writeln!(w, "mpc.version = '2';").unwrap();
        writeln!(w, "mpc.baseMVA = {};", self.base_mva).unwrap();
        writeln!(w, "mpc.bus = [").unwrap();
        let demand: HashMap<usize, f64> =
            self.loads.iter().map(|l| (l.bus_id, l.p_demand)).collect();
        for b in &self.buses {
            let pd = demand.get(&b.id).copied().unwrap_or(0.0) * self.base_mva;
            let bus_type = if b.is_slack { 3 } else { 1 };
            writeln!(w, "\t{}\t{}\t{}\t0\t0\t0\t1\t1\t0\t0\t1\t1.1\t0.9;", b.id, bus_type, pd)
                .unwrap();
        }
        writeln!(w, "];").unwrap();
        writeln!(w, "mpc.gen = [").unwrap();
        for g in &self.generators {
            writeln!(
                w,
                "\t{}\t0\t0\t0\t0\t1\t{}\t1\t{}\t{};",
                g.bus_id,
                self.base_mva,
                g.p_max * self.base_mva,
                g.p_min * self.base_mva
            )
            .unwrap();
        }
        writeln!(w, "];").unwrap();
        writeln!(w, "mpc.branch = [").unwrap();
        for br in &self.branches {
            writeln!(
                w,
                "\t{}\t{}\t0\t{}\t0\t{}\t0\t0\t0\t0\t{};",
                br.from_bus,
                br.to_bus,
                br.reactance,
                br.flow_limit * self.base_mva,
                u8::from(br.in_service)
            )
            .unwrap();
        }
        writeln!(w, "];").unwrap();
        writeln!(w, "mpc.gencost = [").unwrap();
        for g in &self.generators {
            writeln!(
                w,
                "\t2\t0\t0\t3\t{}\t{}\t0;",
                g.cost_quadratic / (self.base_mva * self.base_mva),
                g.cost_linear / self.base_mva
            )
            .unwrap();
        }
        writeln!(w, "];").unwrap();
        out
    }
}

/// One numeric matrix as scanned from the file, with the source line of each
/// row for error reporting.
struct RawMatrix {
    rows: Vec<(usize, Vec<f64>)>,
}

struct RawCase {
    base_mva: Option<f64>,
    matrices: HashMap<String, RawMatrix>,
}

impl RawCase {
    fn scan(source: &str) -> Result<Self, CaseError> {
        let mut base_mva = None;
        let mut matrices: HashMap<String, RawMatrix> = HashMap::new();
        let mut current: Option<(String, RawMatrix)> = None;

        for (idx, raw_line) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('%') {
                Some(p) => &raw_line[..p],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }

            if let Some((name, mut matrix)) = current.take() {
                // Inside a matrix body.
                let (body, closes) = match line.find(']') {
                    Some(p) => (&line[..p], true),
                    None => (line, false),
                };
                for row_text in body.split(';') {
                    let row_text = row_text.trim();
                    if row_text.is_empty() {
                        continue;
                    }
                    let row = parse_row(row_text, line_no)?;
                    if let Some((_, first)) = matrix.rows.first() {
                        if row.len() != first.len() {
                            return Err(CaseError::Parse {
                                line: line_no,
                                msg: format!(
                                    "row has {} columns, matrix {} started with {}",
                                    row.len(),
                                    name,
                                    first.len()
                                ),
                            });
                        }
                    }
                    matrix.rows.push((line_no, row));
                }
                if closes {
                    matrices.insert(name, matrix);
                } else {
                    current = Some((name, matrix));
                }
                continue;
            }

            if let Some(rest) = line.strip_prefix("mpc.") {
                let Some(eq) = rest.find('=') else { continue };
                let name = rest[..eq].trim().to_string();
                let value = rest[eq + 1..].trim();
                if let Some(open) = value.find('[') {
                    let mut matrix = RawMatrix { rows: Vec::new() };
                    let after = &value[open + 1..];
                    let (body, closes) = match after.find(']') {
                        Some(p) => (&after[..p], true),
                        None => (after, false),
                    };
                    for row_text in body.split(';') {
                        let row_text = row_text.trim();
                        if row_text.is_empty() {
                            continue;
                        }
                        matrix.rows.push((line_no, parse_row(row_text, line_no)?));
                    }
                    if closes {
                        matrices.insert(name, matrix);
                    } else {
                        current = Some((name, matrix));
                    }
                } else if name == "baseMVA" {
                    let v = value.trim_end_matches(';').trim();
                    base_mva = Some(v.parse::<f64>().map_err(|_| CaseError::Parse {
                        line: line_no,
                        msg: format!("invalid baseMVA value '{v}'"),
                    })?);
                }
                // Other scalar/string assignments (version, names) are ignored.
            }
        }

        if current.is_some() {
            return Err(CaseError::Parse {
                line: source.lines().count(),
                msg: "unterminated matrix (missing '];')".into(),
            });
        }
        Ok(Self { base_mva, matrices })
    }

    fn matrix(&self, name: &str) -> Result<&RawMatrix, CaseError> {
        self.matrices
            .get(name)
            .ok_or_else(|| CaseError::Validation(format!("missing matrix mpc.{name}")))
    }

    fn into_case(self) -> Result<PowerCase, CaseError> {
        let base_mva = self
            .base_mva
            .ok_or_else(|| CaseError::Validation("missing mpc.baseMVA".into()))?;
        if !(base_mva > 0.0) {
            return Err(CaseError::Validation(format!("baseMVA must be positive, got {base_mva}")));
        }

        let mut buses = Vec::new();
        let mut loads = Vec::new();
        for (line, row) in &self.matrix("bus")?.rows {
            require_cols(row, 13, "bus", *line)?;
            let id = row[0] as usize;
            let bus_type = row[1] as i64;
            buses.push(Bus { id, is_slack: bus_type == 3 });
            let pd = row[2];
            if pd != 0.0 {
                loads.push(Load { bus_id: id, p_demand: pd / base_mva });
            }
        }

        let slack_count = buses.iter().filter(|b| b.is_slack).count();
        if slack_count != 1 {
            return Err(CaseError::Validation(format!(
                "expected exactly one slack bus (type 3), found {slack_count}"
            )));
        }
        let known: HashMap<usize, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        if known.len() != buses.len() {
            return Err(CaseError::Validation("duplicate bus ids".into()));
        }

        let gen_rows = &self.matrix("gen")?.rows;
        let cost_rows = &self.matrix("gencost")?.rows;
        if cost_rows.len() < gen_rows.len() {
            return Err(CaseError::Validation(format!(
                "gencost has {} rows for {} generators",
                cost_rows.len(),
                gen_rows.len()
            )));
        }

        let mut generators = Vec::new();
        for ((line, row), (cost_line, cost)) in gen_rows.iter().zip(cost_rows) {
            require_cols(row, 10, "gen", *line)?;
            require_cols(cost, 4, "gencost", *cost_line)?;
            let status = row[7] != 0.0;
            if !status {
                continue; // out-of-service generator: dropped like a dead branch
            }
            let bus_id = row[0] as usize;
            if !known.contains_key(&bus_id) {
                return Err(CaseError::Validation(format!(
                    "generator references unknown bus {bus_id}"
                )));
            }
            let p_max = row[8] / base_mva;
            let p_min = row[9] / base_mva;
            if p_min > p_max {
                return Err(CaseError::Validation(format!(
                    "generator at bus {bus_id} has Pmin > Pmax"
                )));
            }
            let model = cost[0] as i64;
            if model != 2 {
                return Err(CaseError::Unsupported(format!(
                    "gencost model {model} (only polynomial model 2 is supported)"
                )));
            }
            let ncost = cost[3] as usize;
            if cost.len() < 4 + ncost {
                return Err(CaseError::Parse {
                    line: *cost_line,
                    msg: format!("gencost row declares {ncost} coefficients but has fewer"),
                });
            }
            // Coefficients are listed highest degree first.
            let coeffs = &cost[4..4 + ncost];
            let coeff_of_degree = |d: usize| {
                if ncost > d {
                    coeffs[ncost - 1 - d]
                } else {
                    0.0
                }
            };
            let cost_linear = coeff_of_degree(1) * base_mva;
            let cost_quadratic = coeff_of_degree(2) * base_mva * base_mva;
            if cost_quadratic != 0.0 {
                log::warn!(
                    "generator at bus {bus_id}: quadratic cost coefficient present; \
                     the dispatch objective uses only the linear term"
                );
            }
            generators.push(Generator { bus_id, p_min, p_max, cost_linear, cost_quadratic });
        }
        if generators.is_empty() {
            return Err(CaseError::Validation("no in-service generators".into()));
        }

        let mut branches = Vec::new();
        for (line, row) in &self.matrix("branch")?.rows {
            require_cols(row, 11, "branch", *line)?;
            let from_bus = row[0] as usize;
            let to_bus = row[1] as usize;
            for b in [from_bus, to_bus] {
                if !known.contains_key(&b) {
                    return Err(CaseError::Validation(format!(
                        "branch references unknown bus {b}"
                    )));
                }
            }
            let in_service = row[10] != 0.0;
            let reactance = row[3];
            if in_service && reactance == 0.0 {
                return Err(CaseError::Validation(format!(
                    "in-service branch {from_bus}-{to_bus} has zero reactance"
                )));
            }
            branches.push(Branch {
                from_bus,
                to_bus,
                reactance,
                flow_limit: row[5] / base_mva,
                in_service,
            });
        }

        Ok(PowerCase {
            name: "case".into(),
            base_mva,
            buses,
            generators,
            branches,
            loads,
        })
    }
}

fn parse_row(text: &str, line: usize) -> Result<Vec<f64>, CaseError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| CaseError::Parse {
                line,
                msg: format!("invalid number '{tok}'"),
            })
        })
        .collect()
}

fn require_cols(row: &[f64], want: usize, name: &str, line: usize) -> Result<(), CaseError> {
    if row.len() < want {
        return Err(CaseError::Parse {
            line,
            msg: format!("{name} row has {} columns, expected at least {want}", row.len()),
        });
    }
    Ok(())
}
