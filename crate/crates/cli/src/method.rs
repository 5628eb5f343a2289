use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use zne_core::{Circuit, MitigationPlan, Result as CoreResult};

/// CNOTs a list-based method folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CnotSelector {
    /// CNOT ordinals.
    Ordinals(Vec<usize>),
    /// Every CNOT acting on the pair, in either direction.
    Pair(usize, usize),
}

impl CnotSelector {
    pub fn resolve(&self, circuit: &Circuit) -> Vec<usize> {
        match self {
            CnotSelector::Ordinals(list) => list.clone(),
            CnotSelector::Pair(a, b) => circuit
                .cnot_positions()
                .iter()
                .enumerate()
                .filter(|(_, &pos)| {
                    let mut q: Vec<usize> = circuit.gates()[pos].qubits().iter().map(|q| q.0).collect();
                    q.sort_unstable();
                    q == [*a.min(b), *a.max(b)]
                })
                .map(|(ordinal, _)| ordinal)
                .collect(),
        }
    }
}

impl fmt::Display for CnotSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CnotSelector::Ordinals(list) => {
                let parts: Vec<String> = list.iter().map(usize::to_string).collect();
                write!(f, "{}", parts.join(","))
            }
            CnotSelector::Pair(a, b) => write!(f, "pair={a}-{b}"),
        }
    }
}

impl FromStr for CnotSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(pair) = s.strip_prefix("pair=") {
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| format!("pair selector `{s}` must look like pair=0-1"))?;
            let a: usize = a.trim().parse().map_err(|_| format!("bad qubit `{a}` in `{s}`"))?;
            let b: usize = b.trim().parse().map_err(|_| format!("bad qubit `{b}` in `{s}`"))?;
            if a == b {
                return Err(format!("pair selector `{s}` repeats a qubit"));
            }
            return Ok(CnotSelector::Pair(a, b));
        }
        let list = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| format!("bad CNOT ordinal `{x}` in `{s}`")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CnotSelector::Ordinals(list))
    }
}

/// A mitigation method with its parameters, written as `none`, `fiim<k>`,
/// `riim`, `siim<s>`, `liim-fiim:<list>` or `liim-riim:<list>`, where
/// `<list>` is `0,2,5` or `pair=0-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MethodSpec {
    None,
    Fiim(u32),
    Riim,
    Siim(usize),
    LiimFiim(CnotSelector),
    LiimRiim(CnotSelector),
}

impl MethodSpec {
    pub fn build(&self, circuit: &Circuit) -> CoreResult<MitigationPlan> {
        match self {
            MethodSpec::None => MitigationPlan::unmitigated(circuit),
            MethodSpec::Fiim(k) => MitigationPlan::fiim(circuit, *k),
            MethodSpec::Riim => MitigationPlan::riim(circuit),
            MethodSpec::Siim(s) => MitigationPlan::siim(circuit, *s),
            MethodSpec::LiimFiim(sel) => MitigationPlan::liim_fiim(circuit, &sel.resolve(circuit)),
            MethodSpec::LiimRiim(sel) => MitigationPlan::liim_riim(circuit, &sel.resolve(circuit)),
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::None => write!(f, "none"),
            MethodSpec::Fiim(k) => write!(f, "fiim{k}"),
            MethodSpec::Riim => write!(f, "riim"),
            MethodSpec::Siim(s) => write!(f, "siim{s}"),
            MethodSpec::LiimFiim(sel) => write!(f, "liim-fiim:{sel}"),
            MethodSpec::LiimRiim(sel) => write!(f, "liim-riim:{sel}"),
        }
    }
}

fn positive<T: FromStr + PartialEq + Default>(digits: &str, s: &str) -> Result<T, String> {
    match digits.parse::<T>() {
        Ok(v) if v != T::default() => Ok(v),
        _ => Err(format!("`{s}` needs a positive integer suffix")),
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(list) = s.strip_prefix("liim-fiim:") {
            return Ok(MethodSpec::LiimFiim(list.parse()?));
        }
        if let Some(list) = s.strip_prefix("liim-riim:") {
            return Ok(MethodSpec::LiimRiim(list.parse()?));
        }
        match s {
            "none" => Ok(MethodSpec::None),
            "riim" => Ok(MethodSpec::Riim),
            _ => {
                if let Some(k) = s.strip_prefix("fiim") {
                    positive(k, s).map(MethodSpec::Fiim)
                } else if let Some(n) = s.strip_prefix("siim") {
                    positive(n, s).map(MethodSpec::Siim)
                } else {
                    Err(format!(
                        "unknown method `{s}` (expected none, fiim<k>, riim, siim<s>, liim-fiim:<list>, liim-riim:<list>)"
                    ))
                }
            }
        }
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.to_string()
    }
}

/// Generators for the built-in chain circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ChainLayout {
    /// Two qubits, CNOT(0,1) and CNOT(1,0) alternating.
    #[default]
    Alternating,
    /// Three qubits, CNOTs on (0,1) and (1,2) alternating.
    PairAlternating,
}

impl ChainLayout {
    pub fn build(self, n_cnots: usize, initial_state: &str) -> CoreResult<Circuit> {
        match self {
            ChainLayout::Alternating => Circuit::cnot_chain(n_cnots, initial_state),
            ChainLayout::PairAlternating => Circuit::pair_alternating_chain(n_cnots, initial_state),
        }
    }
}
