use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every calibration method addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Split,
    Rcp,
    RcpAld,
    Cqr,
    CqrAld,
    Plcp { groups: usize },
    Cpcp { clip: bool, mix: bool },
}

pub const DEFAULT_METHODS: [&str; 11] = [
    "split",
    "rcp",
    "rcp-ald",
    "cqr",
    "cqr-ald",
    "plcp-20",
    "plcp-50",
    "cpcp",
    "cpcp-clip",
    "cpcp-mix",
    "cpcp-clip-mix",
];

impl Method {
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Methods built on the shared three-part calibration split.
    pub fn uses_calibration_split(&self) -> bool {
        matches!(self, Method::Rcp | Method::RcpAld | Method::Cpcp { .. })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Split => f.write_str("split"),
            Method::Rcp => f.write_str("rcp"),
            Method::RcpAld => f.write_str("rcp-ald"),
            Method::Cqr => f.write_str("cqr"),
            Method::CqrAld => f.write_str("cqr-ald"),
            Method::Plcp { groups } => write!(f, "plcp-{groups}"),
            Method::Cpcp { clip, mix } => {
                f.write_str("cpcp")?;
                if *clip {
                    f.write_str("-clip")?;
                }
                if *mix {
                    f.write_str("-mix")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let m = match s {
            "split" => Method::Split,
            "rcp" => Method::Rcp,
            "rcp-ald" => Method::RcpAld,
            "cqr" => Method::Cqr,
            "cqr-ald" => Method::CqrAld,
            "cpcp" => Method::Cpcp {
                clip: false,
                mix: false,
            },
            "cpcp-clip" => Method::Cpcp {
                clip: true,
                mix: false,
            },
            "cpcp-mix" => Method::Cpcp {
                clip: false,
                mix: true,
            },
            "cpcp-clip-mix" => Method::Cpcp {
                clip: true,
                mix: true,
            },
            other => match other.strip_prefix("plcp-").map(str::parse::<usize>) {
                Some(Ok(groups)) if groups > 0 => Method::Plcp { groups },
                _ => return Err(Error::Config(format!("unknown method '{other}'"))),
            },
        };
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in DEFAULT_METHODS {
            assert_eq!(name.parse::<Method>().unwrap().name(), name);
        }
        assert_eq!(
            "plcp-7".parse::<Method>().unwrap(),
            Method::Plcp { groups: 7 }
        );
        assert!("plcp-0".parse::<Method>().is_err());
        assert!("magic".parse::<Method>().is_err());
    }
}
