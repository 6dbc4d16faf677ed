//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; keys are case-insensitive.
//! Power values are given in dB/dBm and converted to watts on load.
//! See the repository README for the full key reference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::channel::{
    db_to_linear, dbm_to_watts, default_bs_positions, default_ris_positions, Dimensions, PathLoss, Point,
    ScenarioConfig,
};
use crate::error::{Error, ParseIssue, Result};
use crate::optimizer::OptimizerOptions;

use super::Variant;

/// User-cluster distance sweep `start, start + step, …, ≤ stop` (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepRange {
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.start <= self.stop) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid sweep range {self:?}")));
        }
        Ok(())
    }
}

/// Everything needed to run one distance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Base scenario; the user-disk center is overwritten per sweep point.
    pub scenario: ScenarioConfig,
    pub sweep: SweepRange,
    pub trials: usize,
    pub variants: Vec<Variant>,
    pub output: PathBuf,
    pub seed: u64,
    pub optimizer: OptimizerOptions,
    /// When false, `wall_s` is written as 0 so that output files are
    /// byte-for-byte reproducible.
    pub record_wall_time: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.sweep.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("at least one variant is required".into()));
        }
        Ok(())
    }
}

const REQUIRED: &[&str] = &[
    "num_bs",
    "num_ris",
    "num_users",
    "num_subcarriers",
    "bs_antennas",
    "user_antennas",
    "ris_elements",
    "p_bmax_db",
    "noise_dbm",
];

const OPTIONAL: &[&str] = &[
    "bs_positions",
    "ris_positions",
    "user_radius_m",
    "weights",
    "bs_user_ref_db",
    "bs_user_exponent",
    "bs_ris_ref_db",
    "bs_ris_exponent",
    "ris_user_ref_db",
    "ris_user_exponent",
    "seed",
    "sweep_start_m",
    "sweep_stop_m",
    "sweep_step_m",
    "trials",
    "variants",
    "output",
    "max_outer_iterations",
    "wsr_tolerance",
    "record_wall_time",
];

struct Entry {
    line: usize,
    value: String,
}

struct Fields {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ParseIssue>,
}

impl Fields {
    fn issue(&mut self, key: &str, line: Option<usize>, message: impl Into<String>) {
        self.issues.push(ParseIssue { key: key.to_string(), line, message: message.into() });
    }

    /// Parses `key` with `parse`, recording an issue on failure.
    fn get<T>(&mut self, key: &str, parse: impl FnOnce(&str) -> std::result::Result<T, String>) -> Option<T> {
        let (line, value) = {
            let e = self.entries.get(key)?;
            (e.line, e.value.clone())
        };
        match parse(&value) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.issue(key, Some(line), msg);
                None
            }
        }
    }

    fn or<T>(&mut self, key: &str, default: T, parse: impl FnOnce(&str) -> std::result::Result<T, String>) -> T {
        self.get(key, parse).unwrap_or(default)
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got `{s}`")),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|x| parse_f64(x.trim())).collect()
}

/// `x1, y1; x2, y2; …`
fn parse_points(s: &str) -> std::result::Result<Vec<Point>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|pair| match parse_list(pair)?.as_slice() {
            [x, y] => Ok([*x, *y]),
            _ => Err(format!("expected `x, y` pairs separated by `;`, got `{}`", pair.trim())),
        })
        .collect()
}

fn parse_variants(s: &str) -> std::result::Result<Vec<Variant>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let v: Variant = item.trim().parse()?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Parses config text. All problems are collected and reported together.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let mut fields = Fields { entries: BTreeMap::new(), issues: Vec::new() };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            fields.issue(content, Some(line), "expected `key = value`");
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
            fields.issue(&key, Some(line), "unknown key");
            continue;
        }
        if let Some(prev) = fields.entries.get(&key) {
            let msg = format!("duplicate key (first set on line {})", prev.line);
            fields.issue(&key, Some(line), msg);
            continue;
        }
        let value = value.trim().trim_matches('"').to_string();
        fields.entries.insert(key, Entry { line, value });
    }
    for key in REQUIRED {
        if !fields.entries.contains_key(*key) {
            fields.issue(key, None, "missing required key");
        }
    }

    let count = |f: &mut Fields, key: &str| f.get(key, parse_usize);
    let num_bs = count(&mut fields, "num_bs");
    let num_ris = count(&mut fields, "num_ris");
    let num_users = count(&mut fields, "num_users");
    let num_subcarriers = count(&mut fields, "num_subcarriers");
    let bs_antennas = count(&mut fields, "bs_antennas");
    let user_antennas = count(&mut fields, "user_antennas");
    let ris_elements = count(&mut fields, "ris_elements");
    let p_bmax_db = fields.get("p_bmax_db", parse_f64);
    let noise_dbm = fields.get("noise_dbm", parse_f64);

    let bs_positions = fields.get("bs_positions", parse_points);
    let ris_positions = fields.get("ris_positions", parse_points);
    let user_radius = fields.or("user_radius_m", 1.0, parse_f64);
    let weights = fields.get("weights", parse_list);
    let bs_user = PathLoss {
        ref_loss_db: fields.or("bs_user_ref_db", 30.0, parse_f64),
        exponent: fields.or("bs_user_exponent", 3.0, parse_f64),
    };
    let bs_ris = PathLoss {
        ref_loss_db: fields.or("bs_ris_ref_db", 20.0, parse_f64),
        exponent: fields.or("bs_ris_exponent", 2.0, parse_f64),
    };
    let ris_user = PathLoss {
        ref_loss_db: fields.or("ris_user_ref_db", 20.0, parse_f64),
        exponent: fields.or("ris_user_exponent", 2.0, parse_f64),
    };
    let seed = fields.or("seed", 0, parse_u64);
    let sweep = SweepRange {
        start: fields.or("sweep_start_m", 10.0, parse_f64),
        stop: fields.or("sweep_stop_m", 80.0, parse_f64),
        step: fields.or("sweep_step_m", 5.0, parse_f64),
    };
    let trials = fields.or("trials", 50, parse_usize);
    let variants = fields.or("variants", Variant::ALL.to_vec(), parse_variants);
    let output = fields.or("output", PathBuf::from("results.csv"), |s| Ok(PathBuf::from(s)));
    let mut optimizer = OptimizerOptions::default();
    optimizer.max_outer_iterations = fields.or("max_outer_iterations", optimizer.max_outer_iterations, parse_usize);
    optimizer.wsr_relative_tolerance = fields.or("wsr_tolerance", optimizer.wsr_relative_tolerance, parse_f64);
    let record_wall_time = fields.or("record_wall_time", true, parse_bool);

    let (
        Some(num_bs),
        Some(num_ris),
        Some(num_users),
        Some(num_subcarriers),
        Some(bs_antennas),
        Some(user_antennas),
        Some(ris_elements),
        Some(p_bmax_db),
        Some(noise_dbm),
    ) = (num_bs, num_ris, num_users, num_subcarriers, bs_antennas, user_antennas, ris_elements, p_bmax_db, noise_dbm)
    else {
        return Err(Error::Parse(fields.issues));
    };

    let bs_positions = match bs_positions {
        Some(p) => p,
        None if num_bs == 2 => default_bs_positions(),
        None => {
            fields.issue("bs_positions", None, "required unless num_bs = 2");
            Vec::new()
        }
    };
    let ris_positions = match ris_positions {
        Some(p) => p,
        None if num_ris == 2 => default_ris_positions(),
        None if num_ris == 0 => Vec::new(),
        None => {
            fields.issue("ris_positions", None, "required unless num_ris is 0 or 2");
            Vec::new()
        }
    };
    for (key, got, want) in
        [("bs_positions", bs_positions.len(), num_bs), ("ris_positions", ris_positions.len(), num_ris)]
    {
        if got != want && fields.issues.iter().all(|i| i.key != key) {
            let line = fields.line(key);
            fields.issue(key, line, format!("expected {want} positions, got {got}"));
        }
    }
    let weights = weights.unwrap_or_else(|| vec![1.0; num_users]);
    if weights.len() != num_users {
        let line = fields.line("weights");
        fields.issue("weights", line, format!("expected {num_users} weights, got {}", weights.len()));
    }
    if !fields.issues.is_empty() {
        return Err(Error::Parse(fields.issues));
    }

    let dims = Dimensions { num_bs, num_ris, num_users, num_subcarriers, bs_antennas, user_antennas, ris_elements };
    let spec = ExperimentSpec {
        scenario: ScenarioConfig {
            dims,
            bs_positions,
            ris_positions,
            user_circle_center: [sweep.start, 0.0],
            user_circle_radius: user_radius,
            max_power: vec![db_to_linear(p_bmax_db); num_bs],
            noise_power: dbm_to_watts(noise_dbm),
            weights,
            bs_user,
            bs_ris,
            ris_user,
            seed,
        },
        sweep,
        trials,
        variants,
        output,
        seed,
        optimizer,
        record_wall_time,
    };
    spec.validate()?;
    Ok(spec)
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
num_bs = 2
num_ris = 2
num_users = 4
num_subcarriers = 6
bs_antennas = 8
user_antennas = 2
ris_elements = 32
p_bmax_db = 0
noise_dbm = -120
";

    fn issues(text: &str) -> Vec<ParseIssue> {
        match parse_config_str(text) {
            Err(Error::Parse(issues)) => issues,
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let spec = parse_config_str(MINIMAL).unwrap();
        assert_eq!(spec.scenario.max_power, vec![1.0, 1.0]);
        assert!((spec.scenario.noise_power - 1e-15).abs() < 1e-30);
        assert_eq!(spec.scenario.bs_positions, default_bs_positions());
        assert_eq!(spec.scenario.ris_positions, default_ris_positions());
        assert_eq!(spec.variants, Variant::ALL.to_vec());
        assert_eq!(spec.trials, 50);
        assert_eq!(spec.sweep.points().len(), 15);
        assert_eq!(spec.scenario.weights, vec![1.0; 4]);
    }

    #[test]
    fn db_fields_convert_to_linear() {
        let text = MINIMAL.replace("p_bmax_db = 0", "P_bmax_db = 10").replace("noise_dbm = -120", "noise_dbm = -90");
        let spec = parse_config_str(&text).unwrap();
        assert!((spec.scenario.max_power[0] - 10.0).abs() < 1e-12);
        assert!((spec.scenario.noise_power - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn empty_file_lists_every_required_key() {
        let found = issues("");
        let keys: Vec<_> = found.iter().map(|i| i.key.as_str()).collect();
        assert_eq!(keys, REQUIRED.to_vec());
        assert!(found.iter().all(|i| i.line.is_none()));
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let found = issues(&format!("{MINIMAL}\nbogus = 3\n"));
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].key, "bogus");
        assert_eq!(found[0].line, Some(11));
    }

    #[test]
    fn malformed_value_names_key_and_line() {
        let found = issues(&MINIMAL.replace("num_users = 4", "num_users = four"));
        assert_eq!(found[0].key, "num_users");
        assert_eq!(found[0].line, Some(3));
        let text = format!("{}", Error::Parse(found));
        assert!(text.contains("line 3") && text.contains("num_users"));
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let found = issues(&format!("{MINIMAL}num_bs = 2\n"));
        assert_eq!(found[0].key, "num_bs");
        assert!(found[0].message.contains("duplicate"));
    }

    #[test]
    fn positions_required_for_nondefault_counts() {
        let found = issues(&MINIMAL.replace("num_bs = 2", "num_bs = 3"));
        assert!(found.iter().any(|i| i.key == "bs_positions"));
        let ok = MINIMAL.replace("num_bs = 2", "num_bs = 3") + "bs_positions = 0,10; 0,0; 0,-10\n";
        assert_eq!(parse_config_str(&ok).unwrap().scenario.bs_positions.len(), 3);
    }

    #[test]
    fn variants_and_sweep_are_parsed() {
        let text = format!(
            "{MINIMAL}variants = ideal-ris, no-ris\nsweep_start_m = 20\nsweep_stop_m = 60\nsweep_step_m = 10\n# comment\ntrials = 3 # inline\n"
        );
        let spec = parse_config_str(&text).unwrap();
        assert_eq!(spec.variants, vec![Variant::IdealRis, Variant::NoRis]);
        assert_eq!(spec.sweep.points(), vec![20.0, 30.0, 40.0, 50.0, 60.0]);
        assert_eq!(spec.trials, 3);
        assert!(issues(&format!("{MINIMAL}variants = magic\n"))[0].key == "variants");
    }

    #[test]
    fn zero_trials_is_invalid() {
        let err = parse_config_str(&format!("{MINIMAL}trials = 0\n"));
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }
}
