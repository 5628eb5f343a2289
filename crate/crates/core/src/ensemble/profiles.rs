use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::sim::{Damping, NoiseModel};

/// The calibration dataset shipped with the crate.
pub const BUNDLED_DEVICES_JSON: &str = include_str!("../../data/devices.json");

/// The bracketed-notation source the bundled dataset was converted from.
pub const BUNDLED_TABLE_TEXT: &str = include_str!("../../data/calibration.txt");

/// Draws rejected outside `(0, 1]` before sampling gives up.
const MAX_REDRAWS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QubitProperties {
    pub t1_us: f64,
    pub t2_us: f64,
    pub frequency_ghz: f64,
    pub p0_given_1: f64,
    pub p1_given_0: f64,
}

/// One CNOT pair. Rates are symmetric, so `[j, k]` also covers `[k, j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CxProperties {
    pub pair: [usize; 2],
    pub error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_ns: Option<f64>,
}

/// One machine's calibration snapshot.
///
/// Readout and T2 values are carried for completeness; the simulator never
/// uses them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceProfile {
    pub name: String,
    pub qubits: Vec<QubitProperties>,
    pub x_error: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_length_ns: Option<f64>,
    pub cx: Vec<CxProperties>,
}

fn check_unit(record: &str, field: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::parse(record, field, format!("probability {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_positive(record: &str, field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::parse(record, field, format!("{v} is not a positive number")));
    }
    Ok(())
}

impl DeviceProfile {
    /// A profile with only a `(0, 1)` CNOT error, as used for synthetic ensembles.
    pub fn synthetic(name: impl Into<String>, epsilon: f64) -> Result<Self> {
        let profile = DeviceProfile {
            name: name.into(),
            qubits: Vec::new(),
            x_error: Vec::new(),
            x_length_ns: None,
            cx: vec![CxProperties {
                pair: [0, 1],
                error: epsilon,
                length_ns: None,
            }],
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let rec = self.name.as_str();
        if rec.is_empty() {
            return Err(Error::parse("<unnamed>", "name", "empty system name"));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            check_positive(rec, &format!("qubits[{i}].t1_us"), q.t1_us)?;
            check_positive(rec, &format!("qubits[{i}].t2_us"), q.t2_us)?;
            check_positive(rec, &format!("qubits[{i}].frequency_ghz"), q.frequency_ghz)?;
            check_unit(rec, &format!("qubits[{i}].p0_given_1"), q.p0_given_1)?;
            check_unit(rec, &format!("qubits[{i}].p1_given_0"), q.p1_given_0)?;
        }
        for (i, &x) in self.x_error.iter().enumerate() {
            check_unit(rec, &format!("x_error[{i}]"), x)?;
        }
        if let Some(len) = self.x_length_ns {
            check_positive(rec, "x_length_ns", len)?;
        }
        let mut seen = HashSet::new();
        for (i, cx) in self.cx.iter().enumerate() {
            let [j, k] = cx.pair;
            if j == k {
                return Err(Error::parse(rec, format!("cx[{i}].pair"), "pair repeats a qubit"));
            }
            if !self.qubits.is_empty() && j.max(k) >= self.qubits.len() {
                return Err(Error::parse(rec, format!("cx[{i}].pair"), "qubit index out of range"));
            }
            if !seen.insert((j.min(k), j.max(k))) {
                return Err(Error::parse(rec, format!("cx[{i}].pair"), "pair listed twice"));
            }
            check_unit(rec, &format!("cx[{i}].error"), cx.error)?;
            if let Some(len) = cx.length_ns {
                check_positive(rec, &format!("cx[{i}].length_ns"), len)?;
            }
        }
        Ok(())
    }

    fn cx_entry(&self, a: usize, b: usize) -> Option<&CxProperties> {
        self.cx
            .iter()
            .find(|cx| cx.pair == [a, b] || cx.pair == [b, a])
    }

    pub fn cx_error(&self, a: usize, b: usize) -> Option<f64> {
        self.cx_entry(a, b).map(|cx| cx.error)
    }

    pub fn cx_length_ns(&self, a: usize, b: usize) -> Option<f64> {
        self.cx_entry(a, b).and_then(|cx| cx.length_ns)
    }
}

/// Depolarizing rates from the profile's CNOT errors; with `include_damping`
/// also per-qubit T1 damping over the CNOT duration. `default_epsilon`
/// covers pairs the profile does not list.
pub fn noise_model_of(
    profile: &DeviceProfile,
    include_damping: bool,
    default_epsilon: Option<f64>,
) -> Result<NoiseModel> {
    let mut nm = NoiseModel::default();
    if let Some(eps) = default_epsilon {
        nm = nm.with_default_epsilon(eps)?;
    }
    for cx in &profile.cx {
        nm = nm.with_pair(cx.pair[0], cx.pair[1], cx.error)?;
    }
    if include_damping {
        if profile.qubits.is_empty() {
            return Err(Error::InvalidNoise(format!("`{}` has no T1 data", profile.name)));
        }
        let lengths: Vec<Option<f64>> = profile.cx.iter().map(|cx| cx.length_ns).collect();
        let duration = match lengths.first() {
            Some(Some(first)) if lengths.iter().all(|l| *l == Some(*first)) => *first,
            _ => {
                return Err(Error::InvalidNoise(format!(
                    "`{}` needs one CNOT length shared by all pairs for damping",
                    profile.name
                )))
            }
        };
        let t1 = profile.qubits.iter().map(|q| q.t1_us).collect();
        nm = nm.with_damping(Damping::per_qubit(t1, duration)?);
    }
    Ok(nm)
}

/// A nonempty set of uniquely named devices.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceEnsemble {
    profiles: Vec<DeviceProfile>,
}

impl DeviceEnsemble {
    pub fn new(profiles: Vec<DeviceProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::InvalidEnsemble("an ensemble needs at least one device".into()));
        }
        let mut names = HashSet::new();
        for p in &profiles {
            if !names.insert(p.name.as_str()) {
                return Err(Error::InvalidEnsemble(format!("duplicate device name `{}`", p.name)));
            }
        }
        Ok(DeviceEnsemble { profiles })
    }

    pub fn profiles(&self) -> &[DeviceProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&DeviceProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    /// One noise model per device, in ensemble order.
    pub fn noise_models(&self, include_damping: bool, default_epsilon: Option<f64>) -> Result<Vec<NoiseModel>> {
        self.profiles
            .iter()
            .map(|p| noise_model_of(p, include_damping, default_epsilon))
            .collect()
    }
}

/// `n` single-pair devices with `ε ~ N(mu, sigma²)` redrawn until in `(0, 1]`.
///
/// Device `i` draws from its own stream keyed by `(seed, i)`, so ensembles
/// of different `sigma` but equal seed share the underlying normal deviates.
pub fn sample_normal_profiles(n: usize, mu: f64, sigma: f64, seed: u64) -> Result<DeviceEnsemble> {
    if n == 0 {
        return Err(Error::InvalidEnsemble("n must be at least 1".into()));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::InvalidEnsemble(format!("mean error {mu} outside (0, 1]")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidEnsemble(format!("sigma {sigma} must be non-negative")));
    }
    let profiles = (0..n)
        .map(|i| {
            let mut rng = keyed_rng(seed, i as u64);
            for _ in 0..MAX_REDRAWS {
                let z: f64 = rng.sample(StandardNormal);
                let eps = mu + sigma * z;
                if eps > 0.0 && eps <= 1.0 {
                    return DeviceProfile::synthetic(format!("normal-{i}"), eps);
                }
            }
            Err(Error::InvalidEnsemble(format!(
                "no draw in (0, 1] after {MAX_REDRAWS} attempts for mu {mu}, sigma {sigma}"
            )))
        })
        .collect::<Result<_>>()?;
    DeviceEnsemble::new(profiles)
}

/// A dataset record: either a usable profile or a retired system's name.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SystemEntry {
    Active(DeviceProfile),
    Retired { name: String, retired: bool },
}

impl SystemEntry {
    pub fn name(&self) -> &str {
        match self {
            SystemEntry::Active(p) => &p.name,
            SystemEntry::Retired { name, .. } => name,
        }
    }
}

/// The full contents of a device file, retired markers included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceDataset {
    pub systems: Vec<SystemEntry>,
}

impl DeviceDataset {
    pub fn bundled() -> Result<Self> {
        DeviceDataset::from_json(BUNDLED_DEVICES_JSON)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DeviceDataset::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::parse("<file>", "systems", "empty device file"));
        }
        let root: Value = serde_json::from_str(text)?;
        let systems = root
            .get("systems")
            .ok_or_else(|| Error::parse("<file>", "systems", "missing"))?
            .as_array()
            .ok_or_else(|| Error::parse("<file>", "systems", "expected an array"))?;
        let systems = systems
            .iter()
            .enumerate()
            .map(|(i, v)| parse_system(i, v))
            .collect::<Result<Vec<_>>>()?;
        let mut names = HashSet::new();
        for s in &systems {
            if !names.insert(s.name()) {
                return Err(Error::parse(s.name(), "name", "duplicate system name"));
            }
        }
        Ok(DeviceDataset { systems })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn active(&self) -> impl Iterator<Item = &DeviceProfile> {
        self.systems.iter().filter_map(|s| match s {
            SystemEntry::Active(p) => Some(p),
            SystemEntry::Retired { .. } => None,
        })
    }

    pub fn retired(&self) -> impl Iterator<Item = &str> {
        self.systems.iter().filter_map(|s| match s {
            SystemEntry::Retired { name, .. } => Some(name.as_str()),
            SystemEntry::Active(_) => None,
        })
    }

    /// The non-retired systems as an ensemble.
    pub fn ensemble(&self) -> Result<DeviceEnsemble> {
        DeviceEnsemble::new(self.active().cloned().collect())
    }
}

/// Active profiles of a device file.
pub fn load_device_profiles(path: impl AsRef<Path>) -> Result<DeviceEnsemble> {
    DeviceDataset::load(path)?.ensemble()
}

fn get<'a>(obj: &'a Map<String, Value>, rec: &str, field: &str) -> Result<&'a Value> {
    obj.get(field).ok_or_else(|| Error::parse(rec, field, "missing"))
}

fn as_f64(v: &Value, rec: &str, field: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| Error::parse(rec, field, format!("expected a number, got {v}")))
}

fn as_array<'a>(v: &'a Value, rec: &str, field: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::parse(rec, field, "expected an array"))
}

fn as_object<'a>(v: &'a Value, rec: &str, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::parse(rec, field, "expected an object"))
}

fn num(obj: &Map<String, Value>, rec: &str, prefix: &str, field: &str) -> Result<f64> {
    let path = format!("{prefix}{field}");
    as_f64(get(obj, rec, field).map_err(|_| Error::parse(rec, &path, "missing"))?, rec, &path)
}

fn opt_num(obj: &Map<String, Value>, rec: &str, prefix: &str, field: &str) -> Result<Option<f64>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => as_f64(v, rec, &format!("{prefix}{field}")).map(Some),
    }
}

fn parse_system(index: usize, v: &Value) -> Result<SystemEntry> {
    let fallback = format!("systems[{index}]");
    let obj = as_object(v, &fallback, "")?;
    let name = match obj.get("name") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(Error::parse(fallback, "name", "expected a nonempty string")),
        None => return Err(Error::parse(fallback, "name", "missing")),
    };
    let rec = name.as_str();
    let retired = match obj.get("retired") {
        None | Some(Value::Null) => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return Err(Error::parse(rec, "retired", "expected a boolean")),
    };
    if retired {
        return Ok(SystemEntry::Retired { name, retired });
    }

    let qubits = as_array(get(obj, rec, "qubits")?, rec, "qubits")?
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let prefix = format!("qubits[{i}].");
            let q = as_object(q, rec, &format!("qubits[{i}]"))?;
            Ok(QubitProperties {
                t1_us: num(q, rec, &prefix, "t1_us")?,
                t2_us: num(q, rec, &prefix, "t2_us")?,
                frequency_ghz: num(q, rec, &prefix, "frequency_ghz")?,
                p0_given_1: num(q, rec, &prefix, "p0_given_1")?,
                p1_given_0: num(q, rec, &prefix, "p1_given_0")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x_error = as_array(get(obj, rec, "x_error")?, rec, "x_error")?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, rec, &format!("x_error[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let x_length_ns = opt_num(obj, rec, "", "x_length_ns")?;
    let cx = as_array(get(obj, rec, "cx")?, rec, "cx")?
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let prefix = format!("cx[{i}].");
            let c = as_object(c, rec, &format!("cx[{i}]"))?;
            let pair_field = format!("{prefix}pair");
            let pair = as_array(get(c, rec, "pair").map_err(|_| Error::parse(rec, &pair_field, "missing"))?, rec, &pair_field)?;
            let pair: Vec<usize> = pair
                .iter()
                .map(|q| {
                    q.as_u64()
                        .map(|q| q as usize)
                        .ok_or_else(|| Error::parse(rec, &pair_field, "expected qubit indices"))
                })
                .collect::<Result<_>>()?;
            let [j, k] = pair[..] else {
                return Err(Error::parse(rec, &pair_field, "expected exactly two qubits"));
            };
            Ok(CxProperties {
                pair: [j, k],
                error: num(c, rec, &prefix, "error")?,
                length_ns: opt_num(c, rec, &prefix, "length_ns")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let profile = DeviceProfile {
        name,
        qubits,
        x_error,
        x_length_ns,
        cx,
    };
    profile.validate()?;
    Ok(SystemEntry::Active(profile))
}

/// Parses `1.437[-2]` as `1.437e-2`; plain decimals pass through.
pub fn parse_bracketed(text: &str) -> Option<f64> {
    let text = text.trim();
    let literal = match text.split_once('[') {
        Some((mantissa, rest)) => {
            let exponent = rest.strip_suffix(']')?;
            exponent.parse::<i32>().ok()?;
            format!("{}e{}", mantissa.trim(), exponent)
        }
        None => text.to_string(),
    };
    literal.parse().ok()
}

fn clean_name(cell: &str) -> String {
    let cell = cell.trim();
    let inner = cell
        .strip_prefix("\\texttt{")
        .and_then(|c| c.strip_suffix('}'))
        .unwrap_or(cell);
    inner.replace("\\_", "_").trim().to_string()
}

fn bracketed_list(cell: &str, rec: &str, field: &str) -> Result<Vec<f64>> {
    cell.split(',')
        .map(|v| {
            parse_bracketed(v).ok_or_else(|| Error::parse(rec, field, format!("cannot read `{}`", v.trim())))
        })
        .collect()
}

fn bracketed_one(cell: &str, rec: &str, field: &str) -> Result<f64> {
    parse_bracketed(cell).ok_or_else(|| Error::parse(rec, field, format!("cannot read `{}`", cell.trim())))
}

#[derive(Default)]
struct PartialSystem {
    name: String,
    qubits: Option<Vec<QubitProperties>>,
    gates: Option<(Vec<f64>, f64, f64, f64)>,
}

/// Converts two-qubit calibration tables in `&`-separated bracketed notation.
///
/// Rows with six cells are qubit rows
/// (`name & T1 & T2 & frequency & P(0|1) & P(1|0)`, each a `Q0, Q1` list);
/// rows with five cells are gate rows
/// (`name & X error list & X length & CX error & CX length`).
/// A trailing `\\` is ignored, as are blank lines and lines starting with
/// `#` or `%`. A line `retired <name>` adds a retired marker.
pub fn convert_bracketed_table(text: &str) -> Result<DeviceDataset> {
    let mut order: Vec<PartialSystem> = Vec::new();
    let mut retired = Vec::new();
    let slot = |order: &mut Vec<PartialSystem>, name: &str| -> usize {
        match order.iter().position(|s| s.name == name) {
            Some(i) => i,
            None => {
                order.push(PartialSystem {
                    name: name.to_string(),
                    ..Default::default()
                });
                order.len() - 1
            }
        }
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        if let Some(name) = line.strip_prefix("retired ") {
            retired.push(clean_name(name));
            continue;
        }
        let line = line.strip_suffix("\\\\").unwrap_or(line);
        let cells: Vec<&str> = line.split('&').collect();
        let rec = clean_name(cells[0]);
        if rec.is_empty() {
            return Err(Error::parse(format!("line {}", lineno + 1), "name", "empty system name"));
        }
        match cells.len() {
            6 => {
                let cols = ["t1_us", "t2_us", "frequency_ghz", "p0_given_1", "p1_given_0"];
                let lists = cols
                    .iter()
                    .zip(&cells[1..])
                    .map(|(f, c)| bracketed_list(c, &rec, f))
                    .collect::<Result<Vec<_>>>()?;
                let n = lists[0].len();
                if let Some((f, _)) = cols.iter().zip(&lists).find(|(_, l)| l.len() != n) {
                    return Err(Error::parse(&rec, *f, format!("expected {n} per-qubit values")));
                }
                let qubits = (0..n)
                    .map(|q| QubitProperties {
                        t1_us: lists[0][q],
                        t2_us: lists[1][q],
                        frequency_ghz: lists[2][q],
                        p0_given_1: lists[3][q],
                        p1_given_0: lists[4][q],
                    })
                    .collect();
                let i = slot(&mut order, &rec);
                if order[i].qubits.replace(qubits).is_some() {
                    return Err(Error::parse(&rec, "qubits", "qubit row given twice"));
                }
            }
            5 => {
                let gates = (
                    bracketed_list(cells[1], &rec, "x_error")?,
                    bracketed_one(cells[2], &rec, "x_length_ns")?,
                    bracketed_one(cells[3], &rec, "cx.error")?,
                    bracketed_one(cells[4], &rec, "cx.length_ns")?,
                );
                let i = slot(&mut order, &rec);
                if order[i].gates.replace(gates).is_some() {
                    return Err(Error::parse(&rec, "cx", "gate row given twice"));
                }
            }
            n => {
                return Err(Error::parse(
                    rec,
                    "row",
                    format!("line {} has {n} cells, expected 5 or 6", lineno + 1),
                ))
            }
        }
    }
    let mut systems = order
        .into_iter()
        .map(|s| {
            let qubits = s.qubits.ok_or_else(|| Error::parse(&s.name, "qubits", "no qubit row"))?;
            let (x_error, x_len, cx_err, cx_len) =
                s.gates.ok_or_else(|| Error::parse(&s.name, "cx", "no gate row"))?;
            let profile = DeviceProfile {
                name: s.name,
                qubits,
                x_error,
                x_length_ns: Some(x_len),
                cx: vec![CxProperties {
                    pair: [0, 1],
                    error: cx_err,
                    length_ns: Some(cx_len),
                }],
            };
            profile.validate()?;
            Ok(SystemEntry::Active(profile))
        })
        .collect::<Result<Vec<_>>>()?;
    systems.extend(retired.into_iter().map(|name| SystemEntry::Retired { name, retired: true }));
    if systems.is_empty() {
        return Err(Error::parse("<table>", "systems", "no rows found"));
    }
    let dataset = DeviceDataset { systems };
    // Route through the JSON reader for duplicate-name checks.
    DeviceDataset::from_json(&dataset.to_json()?)
}
