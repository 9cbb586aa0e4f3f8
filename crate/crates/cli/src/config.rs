//! The on-disk scenario format.
//!
//! Scenarios are TOML files:
//!
//! ```toml
//! [group]
//! prime = "23"              # decimal prime modulus
//! base = "5"                # 2 <= base < prime
//! key_mode = "prime"        # optional: "prime" (default) | "general"
//! derivation = "etf"        # optional: "etf" (default) | "plain-dh"
//!
//! [sim]
//! seed = 42
//!
//! [[member]]                # initial membership, in join order
//! id = "m1"
//! node = 7                  # optional explicit leaf (all or none)
//!
//! [channel]                 # optional; omitted means lossless delivery
//! mode = "bsc"              # "off" | "bsc" | "explicit"
//! flip_probability = "0.2"  # bsc: exact decimal string
//! seed = 7                  # bsc: stream seed
//! positions = [4]           # explicit: wire positions flipped per block
//!
//! [codec]                   # optional; omitted means no coding
//! enabled = true
//! matrix = "builtin-8x16"   # keyword or a path relative to this file
//! max_bit_degree = 3        # optional
//!
//! [[event]]
//! kind = "join"             # "join" | "leave"
//! member = "m8"
//! ```

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use keyfold_core::channel::{ChannelModel, FlipProbability};
use keyfold_core::keytree::Derivation;
use keyfold_core::modmath::{parse_natural, GroupParams, KeyMode};
use keyfold_core::sim::{ChannelConfig, CodecConfig, SimConfig, SimEvent};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    group: GroupSection,
    sim: SimSection,
    #[serde(default, rename = "member")]
    members: Vec<MemberSection>,
    channel: Option<ChannelSection>,
    codec: Option<CodecSection>,
    #[serde(default, rename = "event")]
    events: Vec<EventSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupSection {
    prime: String,
    base: String,
    key_mode: Option<String>,
    derivation: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberSection {
    id: String,
    node: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    mode: String,
    flip_probability: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    positions: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodecSection {
    enabled: bool,
    matrix: Option<String>,
    max_bit_degree: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventSection {
    kind: String,
    member: String,
}

/// Reads and validates a scenario file into a runnable [`SimConfig`].
pub fn load_scenario(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    let file: ScenarioFile = toml::from_str(&text)
        .with_context(|| format!("parsing scenario {}", path.display()))?;

    let prime = parse_natural(&file.group.prime).context("group.prime")?;
    let base = parse_natural(&file.group.base).context("group.base")?;
    let params = GroupParams::new(prime, base)
        .map_err(|e| anyhow::anyhow!("group parameters: {e}"))?;
    let key_mode = match file.group.key_mode.as_deref() {
        None | Some("prime") => KeyMode::Prime,
        Some("general") => KeyMode::General,
        Some(other) => bail!("unknown key_mode {other:?} (expected \"prime\" or \"general\")"),
    };
    let derivation = match file.group.derivation.as_deref() {
        None | Some("etf") => Derivation::Totient,
        Some("plain-dh") => Derivation::PlainDh,
        Some(other) => bail!("unknown derivation {other:?} (expected \"etf\" or \"plain-dh\")"),
    };

    let channel = match file.channel {
        None => ChannelConfig::Lossless,
        Some(section) => match section.mode.as_str() {
            "off" => ChannelConfig::Lossless,
            "bsc" => {
                let p = section
                    .flip_probability
                    .as_deref()
                    .context("channel.flip_probability required for bsc mode")?;
                let flip_probability = FlipProbability::parse_decimal(p)
                    .map_err(|e| anyhow::anyhow!("channel.flip_probability: {e}"))?;
                ChannelConfig::Model(ChannelModel::Bsc {
                    flip_probability,
                    seed: section.seed.context("channel.seed required for bsc mode")?,
                })
            }
            "explicit" => {
                if section.positions.is_empty() {
                    bail!("channel.positions required for explicit mode");
                }
                ChannelConfig::Model(ChannelModel::Explicit {
                    positions: section.positions,
                })
            }
            other => bail!("unknown channel mode {other:?}"),
        },
    };

    let codec = match file.codec {
        None => CodecConfig::Off,
        Some(section) if !section.enabled => CodecConfig::Off,
        Some(section) => {
            let spec = section.matrix.as_deref().unwrap_or("builtin-8x16");
            let matrix = if spec == "builtin-8x16" {
                crate::load_matrix(spec)?
            } else {
                // Relative paths resolve against the scenario file.
                let mpath = Path::new(spec);
                if mpath.is_absolute() {
                    crate::load_matrix(spec)?
                } else {
                    let resolved = path.parent().unwrap_or(Path::new(".")).join(mpath);
                    crate::load_matrix(resolved.to_str().context("matrix path not utf-8")?)?
                }
            };
            CodecConfig::On {
                matrix,
                max_bit_degree: section.max_bit_degree.unwrap_or(3),
            }
        }
    };

    let events = file
        .events
        .iter()
        .map(|e| match e.kind.as_str() {
            "join" => Ok(SimEvent::Join(e.member.clone())),
            "leave" => Ok(SimEvent::Leave(e.member.clone())),
            other => bail!("unknown event kind {other:?}"),
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimConfig {
        params,
        derivation,
        key_mode,
        seed: file.sim.seed,
        initial_members: file
            .members
            .iter()
            .map(|m| (m.id.clone(), m.node))
            .collect(),
        events,
        channel,
        codec,
    })
}
