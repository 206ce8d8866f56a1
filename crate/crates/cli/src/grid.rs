use std::fmt;
use std::str::FromStr;

use cellstore::experiments::{linspace, logspace};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Lin,
    Log,
}

/// Grid specification written as `lin:a:b:n` or `log:a:b:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub spacing: Spacing,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Lin => linspace(self.start, self.end, self.points),
            Spacing::Log => logspace(self.start, self.end, self.points),
        }
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [kind, a, b, n] = parts[..] else {
            return Err(format!("expected lin:a:b:n or log:a:b:n, got {s:?}"));
        };
        let spacing = match kind {
            "lin" => Spacing::Lin,
            "log" => Spacing::Log,
            other => return Err(format!("unknown grid spacing {other:?}")),
        };
        let number = |t: &str| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad grid bound {t:?}"))
        };
        let (start, end) = (number(a)?, number(b)?);
        let points: usize = n.parse().map_err(|_| format!("bad point count {n:?}"))?;
        if points == 0 {
            return Err("grid needs at least one point".into());
        }
        if start > end {
            return Err(format!("grid start {start} exceeds end {end}"));
        }
        if spacing == Spacing::Log && start <= 0.0 {
            return Err("log grid bounds must be positive".into());
        }
        if start < 0.0 {
            return Err("grid bounds must be non-negative".into());
        }
        Ok(Self {
            spacing,
            start,
            end,
            points,
        })
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.spacing {
            Spacing::Lin => "lin",
            Spacing::Log => "log",
        };
        write!(f, "{kind}:{:?}:{:?}:{}", self.start, self.end, self.points)
    }
}

impl Serialize for GridSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GridSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_spacings() {
        let g: GridSpec = "log:1e-4:20:400".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 400);
        assert_eq!(v[0], 1e-4);
        assert_eq!(v[399], 20.0);
        let g: GridSpec = "lin:0:1:5".parse().unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "log:1e-4:20:400",
            "lin:0:1:5",
            "lin:0.1:0.30000000000000004:3",
        ] {
            let g: GridSpec = text.parse().unwrap();
            assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
        }
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "log:0:1:5",
            "lin:1:0:5",
            "cubic:0:1:5",
            "lin:0:1",
            "lin:0:1:0",
            "lin:a:1:3",
        ] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }
}
