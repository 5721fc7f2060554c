//! Built-in benchmark datasets.

use std::fmt;
use std::str::FromStr;

use crate::freq::{parse_frequency_table, FrequencyTable};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dataset {
    Meth,
    PolypsLow,
    PolypsHigh,
    Scrapie,
    Butterfly,
    Microbial,
}

impl Dataset {
    pub const ALL: [Dataset; 6] = [
        Dataset::Meth,
        Dataset::PolypsLow,
        Dataset::PolypsHigh,
        Dataset::Scrapie,
        Dataset::Butterfly,
        Dataset::Microbial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Meth => "meth",
            Dataset::PolypsLow => "polyps_low",
            Dataset::PolypsHigh => "polyps_high",
            Dataset::Scrapie => "scrapie",
            Dataset::Butterfly => "butterfly",
            Dataset::Microbial => "microbial",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Dataset::Meth => "methamphetamine users, treatment episodes per user",
            Dataset::PolypsLow => "recurrent adenomatous polyps, low-fibre arm",
            Dataset::PolypsHigh => "recurrent adenomatous polyps, high-fibre arm",
            Dataset::Scrapie => "scrapie count per holding, Great Britain 2005",
            Dataset::Butterfly => "Malayan butterfly species abundances",
            Dataset::Microbial => "protistan species in the Gotland Deep",
        }
    }

    /// The dataset file as shipped.
    pub fn source_text(self) -> &'static str {
        match self {
            Dataset::Meth => include_str!("../data/meth.freq"),
            Dataset::PolypsLow => include_str!("../data/polyps_low.freq"),
            Dataset::PolypsHigh => include_str!("../data/polyps_high.freq"),
            Dataset::Scrapie => include_str!("../data/scrapie.freq"),
            Dataset::Butterfly => include_str!("../data/butterfly.freq"),
            Dataset::Microbial => include_str!("../data/microbial.freq"),
        }
    }

    pub fn table<T: Scalar>(self) -> FrequencyTable<T> {
        parse_frequency_table(self.source_text())
            .expect("built-in dataset parses")
            .with_name(self.name())
    }

    /// Accepts `polyps_low`, `polyps-low`, `PolypsLow` and so on.
    pub fn from_name(name: &str) -> Option<Dataset> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Dataset::ALL
            .into_iter()
            .find(|d| d.name().replace('_', "") == key)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dataset::from_name(s).ok_or_else(|| format!("unknown dataset `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_totals() {
        let expected = [3345.0, 299.0, 341.0, 118.0, 620.0, 84.0];
        for (d, n) in Dataset::ALL.into_iter().zip(expected) {
            assert_eq!(d.table::<f64>().n(), n, "{d}");
        }
    }

    #[test]
    fn max_counts() {
        let expected = [10, 28, 77, 8, 24, 53];
        for (d, m) in Dataset::ALL.into_iter().zip(expected) {
            assert_eq!(d.table::<f64>().max_count(), m, "{d}");
        }
    }

    #[test]
    fn microbial_has_eighteen_cells() {
        assert_eq!(Dataset::Microbial.table::<f64>().len(), 18);
    }

    #[test]
    fn names_round_trip() {
        for d in Dataset::ALL {
            assert_eq!(Dataset::from_name(d.name()), Some(d));
        }
        assert_eq!(Dataset::from_name("polyps-high"), Some(Dataset::PolypsHigh));
        assert_eq!(Dataset::from_name("nope"), None);
    }
}
