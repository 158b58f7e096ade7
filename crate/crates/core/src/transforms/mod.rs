//! Semantics-preserving netlist passes and the recipes that chain them.

mod bubble;
mod clock_gating;
pub(crate) mod edit;
mod max_transition;
mod rebalance;
mod remap;
mod retime;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::{mask_dont_use, CellLibrary};
use crate::netlist::{flatten, Netlist};

pub use bubble::bubble_push;
pub use clock_gating::clock_gating;
pub use max_transition::max_transition;
pub use rebalance::rebalance;
pub use remap::remap;
pub use retime::{retime, RetimeObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RebalanceLevel {
    #[default]
    Basic,
    Extreme,
}

/// One pass with its parameters. Serialized as a `[[pass]]` table with a
/// `kind` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PassConfig {
    ClockGating {
        #[serde(default = "default_min_group")]
        min_group: usize,
    },
    Ungroup,
    Rebalance {
        #[serde(default)]
        level: RebalanceLevel,
    },
    BubblePush,
    MaxTransition {
        /// ps
        #[serde(default = "default_slew_limit")]
        limit: f64,
    },
    RetimeDelay {
        #[serde(default = "default_max_moves")]
        max_moves: usize,
    },
    RetimeArea {
        #[serde(default = "default_max_moves")]
        max_moves: usize,
    },
}

fn default_min_group() -> usize {
    3
}

fn default_slew_limit() -> f64 {
    10.0
}

fn default_max_moves() -> usize {
    64
}

impl PassConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PassConfig::ClockGating { .. } => "clock-gating",
            PassConfig::Ungroup => "ungroup",
            PassConfig::Rebalance { .. } => "rebalance",
            PassConfig::BubblePush => "bubble-push",
            PassConfig::MaxTransition { .. } => "max-transition",
            PassConfig::RetimeDelay { .. } => "retime-delay",
            PassConfig::RetimeArea { .. } => "retime-area",
        }
    }

    fn needs_flat(&self) -> bool {
        !matches!(self, PassConfig::Ungroup)
    }
}

/// An optional excluded cell followed by an ordered list of passes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dont_use: Option<String>,
    #[serde(default, rename = "pass")]
    pub passes: Vec<PassConfig>,
}

impl Recipe {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("recipe: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("recipe serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub pass: &'static str,
    pub message: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.pass, self.message)
    }
}

/// Output of a pass or recipe.
#[derive(Debug, Clone)]
pub struct PassResult {
    pub netlist: Netlist,
    /// Extra cycles of output latency relative to the input netlist.
    pub latency: usize,
    pub log: Vec<LogEntry>,
    pub warnings: Vec<String>,
}

impl PassResult {
    pub(crate) fn new(netlist: Netlist) -> Self {
        Self {
            netlist,
            latency: 0,
            log: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub(crate) fn note(&mut self, pass: &'static str, message: impl Into<String>) {
        self.log.push(LogEntry {
            pass,
            message: message.into(),
        });
    }
}

pub fn ungroup(netlist: &Netlist) -> Result<PassResult> {
    let was_flat = netlist.is_flat();
    let mut r = PassResult::new(flatten(netlist)?);
    if was_flat {
        r.note("ungroup", "already flat");
    } else {
        r.note(
            "ungroup",
            format!(
                "flattened to {} instances",
                r.netlist.top_module().instances.len()
            ),
        );
    }
    Ok(r)
}

pub fn apply_pass(netlist: &Netlist, lib: &CellLibrary, pass: &PassConfig) -> Result<PassResult> {
    match *pass {
        PassConfig::ClockGating { min_group } => clock_gating(netlist, lib, min_group),
        PassConfig::Ungroup => ungroup(netlist),
        PassConfig::Rebalance { level } => rebalance(netlist, lib, level),
        PassConfig::BubblePush => bubble_push(netlist, lib),
        PassConfig::MaxTransition { limit } => max_transition(netlist, lib, limit),
        PassConfig::RetimeDelay { max_moves } => {
            retime(netlist, lib, RetimeObjective::Delay, max_moves)
        }
        PassConfig::RetimeArea { max_moves } => {
            retime(netlist, lib, RetimeObjective::Area, max_moves)
        }
    }
}

/// Applies a recipe: the cell exclusion and remap first, then each pass in
/// order. Passes that need a flat netlist flatten it first.
pub fn apply_recipe(netlist: &Netlist, lib: &CellLibrary, recipe: &Recipe) -> Result<PassResult> {
    let masked;
    let lib = match &recipe.dont_use {
        Some(cell) => {
            masked = mask_dont_use(lib, cell)?;
            &masked
        }
        None => lib,
    };
    let mut acc = match &recipe.dont_use {
        Some(_) => remap(netlist, lib)?,
        None => PassResult::new(netlist.clone()),
    };
    for pass in &recipe.passes {
        if pass.needs_flat() && !acc.netlist.is_flat() {
            acc.netlist = flatten(&acc.netlist)?;
            acc.note(pass.name(), "implicit flatten");
        }
        let r = apply_pass(&acc.netlist, lib, pass)?;
        acc.netlist = r.netlist;
        acc.latency += r.latency;
        acc.log.extend(r.log);
        acc.warnings.extend(r.warnings);
    }
    Ok(acc)
}

/// Named pass combinations used by the variant engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technique {
    ClockGating,
    Ungroup,
    Datapath,
    BubblePush,
    MaxTransition,
    RetimeDelay,
    RetimeArea,
    #[serde(rename = "clock-gating+retime-delay")]
    ClockGatingRetimeDelay,
    #[serde(rename = "bubble-push+retime-area")]
    BubblePushRetimeArea,
}

impl Technique {
    pub const ALL: [Technique; 9] = [
        Technique::ClockGating,
        Technique::Ungroup,
        Technique::Datapath,
        Technique::BubblePush,
        Technique::MaxTransition,
        Technique::RetimeDelay,
        Technique::RetimeArea,
        Technique::ClockGatingRetimeDelay,
        Technique::BubblePushRetimeArea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Technique::ClockGating => "clock-gating",
            Technique::Ungroup => "ungroup",
            Technique::Datapath => "datapath",
            Technique::BubblePush => "bubble-push",
            Technique::MaxTransition => "max-transition",
            Technique::RetimeDelay => "retime-delay",
            Technique::RetimeArea => "retime-area",
            Technique::ClockGatingRetimeDelay => "clock-gating+retime-delay",
            Technique::BubblePushRetimeArea => "bubble-push+retime-area",
        }
    }

    pub fn passes(self, p: &TechniqueParams) -> Vec<PassConfig> {
        let cg = PassConfig::ClockGating {
            min_group: p.min_group,
        };
        let rd = PassConfig::RetimeDelay {
            max_moves: p.max_moves,
        };
        let ra = PassConfig::RetimeArea {
            max_moves: p.max_moves,
        };
        match self {
            Technique::ClockGating => vec![cg],
            Technique::Ungroup => vec![PassConfig::Ungroup],
            Technique::Datapath => vec![PassConfig::Rebalance { level: p.rebalance }],
            Technique::BubblePush => vec![PassConfig::BubblePush],
            Technique::MaxTransition => vec![PassConfig::MaxTransition {
                limit: p.slew_limit,
            }],
            Technique::RetimeDelay => vec![rd],
            Technique::RetimeArea => vec![ra],
            Technique::ClockGatingRetimeDelay => vec![cg, rd],
            Technique::BubblePushRetimeArea => vec![PassConfig::BubblePush, ra],
        }
    }

    /// Whether the technique can change which flip-flops exist or how they
    /// are clocked.
    pub fn changes_registers(self) -> bool {
        matches!(
            self,
            Technique::ClockGating
                | Technique::RetimeDelay
                | Technique::RetimeArea
                | Technique::ClockGatingRetimeDelay
                | Technique::BubblePushRetimeArea
        )
    }

    /// Combines single techniques into one, if the combination is known.
    pub fn combine(parts: &[Technique]) -> Option<Technique> {
        let mut v = parts.to_vec();
        v.sort();
        v.dedup();
        match v.as_slice() {
            [t] => Some(*t),
            [Technique::ClockGating, Technique::RetimeDelay] => {
                Some(Technique::ClockGatingRetimeDelay)
            }
            [Technique::BubblePush, Technique::RetimeArea] => Some(Technique::BubblePushRetimeArea),
            _ => None,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown technique {s}")))
    }
}

/// Parameters shared by technique pass lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TechniqueParams {
    pub min_group: usize,
    pub rebalance: RebalanceLevel,
    pub slew_limit: f64,
    pub max_moves: usize,
}

impl Default for TechniqueParams {
    fn default() -> Self {
        Self {
            min_group: default_min_group(),
            rebalance: RebalanceLevel::Extreme,
            slew_limit: default_slew_limit(),
            max_moves: default_max_moves(),
        }
    }
}

pub(crate) fn require_flat(netlist: &Netlist, pass: &'static str) -> Result<()> {
    if netlist.is_flat() {
        Ok(())
    } else {
        Err(Error::Pass {
            pass,
            message: "netlist must be flat; ungroup first".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recipe_toml_round_trip() {
        let text = r#"
label = "r1"
dont_use = "NAND2_X1"

[[pass]]
kind = "clock-gating"
min_group = 2

[[pass]]
kind = "rebalance"
level = "extreme"

[[pass]]
kind = "retime-delay"
"#;
        let r = Recipe::from_toml(text).unwrap();
        assert_eq!(r.dont_use.as_deref(), Some("NAND2_X1"));
        assert_eq!(r.passes[0], PassConfig::ClockGating { min_group: 2 });
        assert_eq!(r.passes[2], PassConfig::RetimeDelay { max_moves: 64 });
        assert_eq!(Recipe::from_toml(&r.to_toml()).unwrap(), r);
    }

    #[test]
    fn unknown_pass_kind_is_rejected() {
        assert!(Recipe::from_toml("[[pass]]\nkind = \"teleport\"\n").is_err());
    }

    #[test]
    fn technique_names_round_trip() {
        for t in Technique::ALL {
            assert_eq!(t.name().parse::<Technique>().unwrap(), t);
        }
        assert_eq!(
            Technique::combine(&[Technique::RetimeDelay, Technique::ClockGating]),
            Some(Technique::ClockGatingRetimeDelay)
        );
        assert_eq!(
            Technique::combine(&[Technique::Ungroup, Technique::Datapath]),
            None
        );
    }
}
