use serde::{Deserialize, Serialize};

use crate::dataset::NUM_LABELS;
use crate::error::{Error, Result};
use crate::optics::ModeSpec;

/// `(m, n)` reference orders, labels 0 to 9.
pub const REFERENCE_SET: [(u32, u32); NUM_LABELS] = [
    (11, 4),
    (5, 3),
    (5, 11),
    (4, 7),
    (11, 3),
    (8, 13),
    (6, 4),
    (13, 4),
    (8, 3),
    (12, 13),
];

/// Reference set with the label-8 mode replaced by HG(3,4).
pub const REFERENCE_SET_ALT_A: [(u32, u32); NUM_LABELS] = {
    let mut s = REFERENCE_SET;
    s[8] = (3, 4);
    s
};

/// Reference set with the label-1 mode replaced by HG(5,4).
pub const REFERENCE_SET_ALT_B: [(u32, u32); NUM_LABELS] = {
    let mut s = REFERENCE_SET;
    s[1] = (5, 4);
    s
};

/// One mode per label; all `(m, n)` pairs distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModeSpec>", into = "Vec<ModeSpec>")]
pub struct ModeSet([ModeSpec; NUM_LABELS]);

impl ModeSet {
    pub fn new(entries: [ModeSpec; NUM_LABELS]) -> Result<Self> {
        for (i, a) in entries.iter().enumerate() {
            a.validate()?;
            if let Some(b) = entries[..i].iter().find(|b| (b.m, b.n) == (a.m, a.n)) {
                return Err(Error::InvalidModeSet(format!(
                    "HG({},{}) assigned to more than one label",
                    b.m, b.n
                )));
            }
        }
        Ok(Self(entries))
    }

    /// All modes share one waist and centre.
    pub fn from_orders(orders: &[(u32, u32); NUM_LABELS], waist: f64, center: [f64; 2]) -> Result<Self> {
        Self::new(orders.map(|(m, n)| ModeSpec {
            m,
            n,
            waist,
            center,
        }))
    }

    /// Resolves `reference`, `reference-alt-a` and `reference-alt-b`.
    pub fn named(name: &str, waist: f64, center: [f64; 2]) -> Result<Self> {
        let orders = match name {
            "reference" => REFERENCE_SET,
            "reference-alt-a" => REFERENCE_SET_ALT_A,
            "reference-alt-b" => REFERENCE_SET_ALT_B,
            other => return Err(Error::InvalidModeSet(format!("unknown mode set {other:?}"))),
        };
        Self::from_orders(&orders, waist, center)
    }

    pub fn entries(&self) -> &[ModeSpec; NUM_LABELS] {
        &self.0
    }

    pub fn orders(&self) -> [(u32, u32); NUM_LABELS] {
        self.0.map(|s| (s.m, s.n))
    }

    /// Mode `perm[j]` of `self` becomes the mode of label `j`.
    pub fn permuted(&self, perm: &[usize; NUM_LABELS]) -> Result<Self> {
        Self::new(perm.map(|k| self.0[k]))
    }
}

impl TryFrom<Vec<ModeSpec>> for ModeSet {
    type Error = Error;

    fn try_from(v: Vec<ModeSpec>) -> Result<Self> {
        let arr: [ModeSpec; NUM_LABELS] = v
            .try_into()
            .map_err(|v: Vec<_>| Error::InvalidModeSet(format!("{} entries, expected 10", v.len())))?;
        Self::new(arr)
    }
}

impl From<ModeSet> for Vec<ModeSpec> {
    fn from(m: ModeSet) -> Self {
        m.0.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_sets() {
        let f3 = ModeSet::named("reference", 7.0, [0.0, 0.0]).unwrap();
        assert_eq!(f3.orders()[7], (13, 4));
        assert_eq!(f3.orders()[9], (12, 13));
        let a = ModeSet::named("reference-alt-a", 7.0, [0.0, 0.0]).unwrap();
        assert_eq!(a.orders()[8], (3, 4));
        assert_eq!(&a.orders()[..8], &f3.orders()[..8]);
        let b = ModeSet::named("reference-alt-b", 7.0, [0.0, 0.0]).unwrap();
        assert_eq!(b.orders()[1], (5, 4));
        assert!(ModeSet::named("nonexistent", 7.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn duplicates_rejected() {
        let mut orders = REFERENCE_SET;
        orders[3] = orders[0];
        assert!(matches!(
            ModeSet::from_orders(&orders, 7.0, [0.0, 0.0]),
            Err(Error::InvalidModeSet(_))
        ));
    }

    #[test]
    fn serde_round_trip_validates() {
        let f3 = ModeSet::named("reference", 7.0, [0.0, 0.0]).unwrap();
        let text = serde_json::to_string(&f3).unwrap();
        assert_eq!(serde_json::from_str::<ModeSet>(&text).unwrap(), f3);
        let short = serde_json::to_string(&f3.entries()[..9]).unwrap();
        assert!(serde_json::from_str::<ModeSet>(&short).is_err());
    }
}
