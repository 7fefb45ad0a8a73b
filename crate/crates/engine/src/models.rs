//! Model identifiers accepted in study configs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tailrisk_core::distributions::DistKind;
use tailrisk_core::volatility::Family;
use tailrisk_dbn::Algorithm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    /// Historical simulation.
    Hs,
    DeltaNormal,
    Volatility(Family, DistKind),
    /// Historical simulation on a window whose last day is a DBN forecast.
    Dbn(Algorithm),
}

impl ModelSpec {
    pub fn all() -> Vec<ModelSpec> {
        let mut out = vec![ModelSpec::Hs, ModelSpec::DeltaNormal];
        for family in [Family::Arch, Family::Garch, Family::Egarch, Family::RiskMetrics] {
            for dist in [DistKind::Normal, DistKind::SkewedT] {
                out.push(ModelSpec::Volatility(family, dist));
            }
        }
        out.extend(Algorithm::ALL.map(ModelSpec::Dbn));
        out
    }

    pub fn id(&self) -> String {
        match self {
            ModelSpec::Hs => "hs".into(),
            ModelSpec::DeltaNormal => "delta_normal".into(),
            ModelSpec::Volatility(f, d) => format!("{}_{}", f.as_str(), d.as_str()),
            ModelSpec::Dbn(Algorithm::SiHitonPc) => "dbn_si_hiton".into(),
            ModelSpec::Dbn(a) => format!("dbn_{}", a.as_str()),
        }
    }

    pub fn is_dbn(&self) -> bool {
        matches!(self, ModelSpec::Dbn(_))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelSpec::all()
            .into_iter()
            .find(|m| m.id() == s.trim())
            .ok_or_else(|| {
                let known: Vec<String> = ModelSpec::all().iter().map(ModelSpec::id).collect();
                format!("unknown model `{s}` (known: {})", known.join(", "))
            })
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.id()
    }
}
