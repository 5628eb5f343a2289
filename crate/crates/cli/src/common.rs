use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use zne_core::ensemble::DeviceDataset;
use zne_core::{Circuit, Observable};

use crate::method::{ChainLayout, MethodSpec};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INTEGRITY: u8 = 3;

/// Environment variable overriding the bundled device dataset.
pub const DATA_ENV: &str = "ZNE_LAB_DATA";

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    /// Prefixes the message with the offending flag or field.
    pub fn at(mut self, field: &str) -> Self {
        self.message = format!("{field}: {}", self.message);
        self
    }
}

impl From<zne_core::Error> for CliError {
    fn from(e: zne_core::Error) -> Self {
        CliError {
            code: if e.is_integrity() { EXIT_INTEGRITY } else { EXIT_INPUT },
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Context<T> {
    fn at(self, field: &str) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn at(self, field: &str) -> CliResult<T> {
        self.map_err(|e| e.into().at(field))
    }
}

/// What the estimate measures: `bit_value`, `ideal_target` (probability of
/// the noiseless output) or `target:<bits>`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ObservableSpec {
    BitValue,
    #[default]
    IdealTarget,
    Target(String),
}

impl ObservableSpec {
    pub fn resolve(&self, circuit: &Circuit) -> zne_core::Result<Observable> {
        match self {
            ObservableSpec::BitValue => Ok(Observable::BitValue),
            ObservableSpec::IdealTarget => Observable::ideal_target(circuit),
            ObservableSpec::Target(bits) => Ok(Observable::TargetProbability(bits.clone())),
        }
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableSpec::BitValue => write!(f, "bit_value"),
            ObservableSpec::IdealTarget => write!(f, "ideal_target"),
            ObservableSpec::Target(bits) => write!(f, "target:{bits}"),
        }
    }
}

impl FromStr for ObservableSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bit_value" => Ok(ObservableSpec::BitValue),
            "ideal_target" => Ok(ObservableSpec::IdealTarget),
            _ => match s.strip_prefix("target:") {
                Some(bits) if !bits.is_empty() && bits.chars().all(|c| c == '0' || c == '1') => {
                    Ok(ObservableSpec::Target(bits.to_string()))
                }
                _ => Err(format!(
                    "unknown observable `{s}` (expected bit_value, ideal_target or target:<bits>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for ObservableSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ObservableSpec> for String {
    fn from(o: ObservableSpec) -> String {
        o.to_string()
    }
}

#[derive(Debug, Clone, clap::Args)]
#[group(skip)]
pub struct CircuitArgs {
    /// Circuit JSON file.
    #[arg(long, value_name = "FILE", required_unless_present = "chain", conflicts_with = "chain")]
    pub circuit: Option<PathBuf>,
    /// Built-in chain with this many CNOTs.
    #[arg(long, value_name = "N")]
    pub chain: Option<usize>,
    /// Chain layout.
    #[arg(long, value_enum, default_value_t = ChainLayout::Alternating)]
    pub layout: ChainLayout,
    /// Chain input bitstring in qubit order (default: all zeros).
    #[arg(long, value_name = "BITS")]
    pub init: Option<String>,
}

impl CircuitArgs {
    pub fn load(&self) -> CliResult<Circuit> {
        match (&self.circuit, self.chain) {
            (Some(path), None) => load_circuit(path).at("--circuit"),
            (None, Some(n)) => {
                let width = match self.layout {
                    ChainLayout::Alternating => 2,
                    ChainLayout::PairAlternating => 3,
                };
                let init = self.init.clone().unwrap_or_else(|| "0".repeat(width));
                self.layout.build(n, &init).at("--chain")
            }
            _ => Err(CliError::input("exactly one of --circuit and --chain is required")),
        }
    }
}

pub fn load_circuit(path: &Path) -> CliResult<Circuit> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(Circuit::from_json(&text)?)
}

#[derive(Debug, Clone, clap::Args)]
pub struct MethodArgs {
    /// none, fiim, riim, siim, liim-fiim, liim-riim; a full spec such as
    /// `fiim2` or `liim-riim:pair=0-1` is also accepted.
    #[arg(long, default_value = "fiim")]
    pub method: String,
    /// FIIM order.
    #[arg(long, default_value_t = 1)]
    pub order: u32,
    /// SIIM set count.
    #[arg(long)]
    pub sets: Option<usize>,
    /// LIIM CNOT list: ordinals `0,2,5` or `pair=0-1`.
    #[arg(long)]
    pub list: Option<String>,
}

impl MethodArgs {
    pub fn spec(&self) -> CliResult<MethodSpec> {
        let need = |flag: &str, v: &Option<String>| {
            v.clone()
                .ok_or_else(|| CliError::input(format!("--method {} requires {flag}", self.method)))
        };
        let text = match self.method.as_str() {
            "fiim" => format!("fiim{}", self.order),
            "siim" => format!(
                "siim{}",
                self.sets
                    .ok_or_else(|| CliError::input("--method siim requires --sets"))?
            ),
            "liim-fiim" | "liim-riim" => format!("{}:{}", self.method, need("--list", &self.list)?),
            other => other.to_string(),
        };
        text.parse().map_err(|e: String| {
            let field = match self.method.as_str() {
                "fiim" => "--order",
                "siim" => "--sets",
                "liim-fiim" | "liim-riim" => "--list",
                _ => "--method",
            };
            CliError::input(e).at(field)
        })
    }
}

/// `--data` if given, else `$ZNE_LAB_DATA`, else the bundled dataset.
pub fn load_dataset(data: Option<&Path>) -> CliResult<DeviceDataset> {
    let env = std::env::var_os(DATA_ENV).map(PathBuf::from);
    match data.map(Path::to_path_buf).or(env) {
        Some(path) => DeviceDataset::load(&path).map_err(|e| CliError::from(e).at(&path.display().to_string())),
        None => Ok(DeviceDataset::bundled()?),
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => print_stdout(&format!("{text}\n")),
    }
}

/// Writes to stdout; a closed pipe downstream is not an error.
pub fn print_stdout(text: &str) -> CliResult<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
