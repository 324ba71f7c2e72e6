//! Asymptotic exponents of fiber volumes from simple-normal-crossing data.
//!
//! Given the central fiber of a resolution written as `Σ a_j E_j` together with
//! the discrepancies `k_j` of the exceptional divisors, the fiber-volume
//! density near the critical value behaves like
//! `|s|^{-2(1-β)} (-log|s|)^{N-1}` where `β = min (k_j+1)/a_j` and `N` is the
//! largest number of threshold-attaining components sharing a common point.
//! Everything here is exact rational arithmetic.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rational = Ratio<u64>;

/// Parse `"p/q"` or a bare integer into an exact positive-or-zero rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text, "1"),
    };
    let p: u64 = num
        .parse()
        .map_err(|_| Error::invalid(format!("bad rational numerator in {text:?}")))?;
    let q: u64 = den
        .parse()
        .map_err(|_| Error::invalid(format!("bad rational denominator in {text:?}")))?;
    if q == 0 {
        return Err(Error::invalid(format!("zero denominator in {text:?}")));
    }
    Ok(Rational::new(p, q))
}

pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorRecord {
    pub id: String,
    /// Coefficient `a_j` of the component in the central fiber.
    #[serde(rename = "a")]
    pub multiplicity: u32,
    /// Coefficient `k_j` in the ramification formula.
    #[serde(rename = "k")]
    pub discrepancy: u32,
}

impl DivisorRecord {
    pub fn new(id: impl Into<String>, multiplicity: u32, discrepancy: u32) -> Self {
        DivisorRecord {
            id: id.into(),
            multiplicity,
            discrepancy,
        }
    }

    /// `(k + 1) / a`
    pub fn threshold(&self) -> Rational {
        Rational::new(u64::from(self.discrepancy) + 1, u64::from(self.multiplicity))
    }
}

/// A resolution's central fiber: divisor records plus the maximal faces of
/// the intersection nerve (sets of components with a common point).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolutionData {
    #[serde(rename = "dimension")]
    pub ambient_dimension: u32,
    pub divisors: Vec<DivisorRecord>,
    pub nerve: Vec<Vec<String>>,
}

impl ResolutionData {
    pub fn new(
        ambient_dimension: u32,
        divisors: Vec<DivisorRecord>,
        nerve: Vec<Vec<String>>,
    ) -> Result<Self> {
        let data = ResolutionData {
            ambient_dimension,
            divisors,
            nerve,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let data: ResolutionData = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("resolution JSON: {e}")))?;
        data.validate()?;
        Ok(data)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("resolution data serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.ambient_dimension < 2 {
            return Err(Error::invalid("ambient dimension must be at least 2"));
        }
        if self.divisors.is_empty() {
            return Err(Error::invalid("divisor list is empty"));
        }
        let mut seen = HashMap::new();
        for (i, d) in self.divisors.iter().enumerate() {
            if d.multiplicity == 0 {
                return Err(Error::invalid(format!("divisor {} has multiplicity 0", d.id)));
            }
            if seen.insert(d.id.as_str(), i).is_some() {
                return Err(Error::invalid(format!("duplicate divisor id {}", d.id)));
            }
        }
        let mut covered = vec![false; self.divisors.len()];
        for face in &self.nerve {
            if face.is_empty() {
                return Err(Error::invalid("nerve contains an empty face"));
            }
            if face.len() > self.ambient_dimension as usize {
                return Err(Error::invalid(format!(
                    "face {face:?} has more members than the ambient dimension {}",
                    self.ambient_dimension
                )));
            }
            let mut members = BTreeSet::new();
            for id in face {
                let idx = *seen
                    .get(id.as_str())
                    .ok_or_else(|| Error::invalid(format!("face member {id} is not a divisor")))?;
                if !members.insert(idx) {
                    return Err(Error::invalid(format!("face {face:?} repeats {id}")));
                }
                covered[idx] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::invalid(format!(
                "divisor {} does not appear in any nerve face",
                self.divisors[i].id
            )));
        }
        Ok(())
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.divisors.iter().position(|d| d.id == id)
    }

    /// Faces as index sets into `divisors`.
    pub fn face_indices(&self) -> Vec<Vec<usize>> {
        self.nerve
            .iter()
            .map(|face| face.iter().filter_map(|id| self.index_of(id)).collect())
            .collect()
    }
}

/// The log-canonical threshold `β = min_j (k_j + 1) / a_j`.
pub fn lct(data: &ResolutionData) -> Result<Rational> {
    data.divisors
        .iter()
        .map(DivisorRecord::threshold)
        .min()
        .ok_or_else(|| Error::invalid("divisor list is empty"))
}

/// The log power `N`: the largest number of threshold-attaining components
/// lying in one nerve face.
pub fn log_multiplicity(data: &ResolutionData) -> Result<u32> {
    data.validate()?;
    let beta = lct(data)?;
    let best = data
        .face_indices()
        .iter()
        .map(|face| {
            face.iter()
                .filter(|&&i| data.divisors[i].threshold() == beta)
                .count()
        })
        .max()
        .unwrap_or(0);
    Ok(best as u32)
}

/// A face realizing `N`, listed by divisor index.
pub fn extremal_face(data: &ResolutionData) -> Result<Vec<usize>> {
    let beta = lct(data)?;
    let count = |face: &Vec<usize>| {
        face.iter()
            .filter(|&&i| data.divisors[i].threshold() == beta)
            .count()
    };
    data.face_indices()
        .into_iter()
        .max_by(|a, b| count(a).cmp(&count(b)).then(b.len().cmp(&a.len())))
        .ok_or_else(|| Error::invalid("nerve is empty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsymptoticProfile {
    pub beta: Rational,
    pub log_power: u32,
}

impl fmt::Display for AsymptoticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "beta={} N={}", format_rational(&self.beta), self.log_power)
    }
}

pub fn asymptotic_profile(data: &ResolutionData) -> Result<AsymptoticProfile> {
    Ok(AsymptoticProfile {
        beta: lct(data)?,
        log_power: log_multiplicity(data)?,
    })
}

/// Singular fiber types of minimal elliptic surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KodairaType {
    /// `mI_0`: smooth elliptic curve of multiplicity `m`.
    MultipleI0 { m: u32 },
    /// `mI_1`: nodal rational curve of multiplicity `m`.
    MultipleI1 { m: u32 },
    /// `mI_2`: two rational curves meeting in two points.
    MultipleI2 { m: u32 },
    /// `mI_b`, `b ≥ 3`: cycle of `b` rational curves.
    MultipleIb { m: u32, b: u32 },
    /// `I_b^*`, `b ≥ 0`.
    IStar { b: u32 },
    II,
    III,
    IV,
    IIStar,
    IIIStar,
    IVStar,
}

impl KodairaType {
    /// Parse a tag such as `mI1`, `mIb`, `I0star`, `Ibstar`, `IIstar`.
    /// `m` defaults to 1 and `b` is required where the tag is parametric.
    pub fn from_tag(tag: &str, m: Option<u32>, b: Option<u32>) -> Result<Self> {
        let m = m.unwrap_or(1);
        if m == 0 {
            return Err(Error::invalid("multiplicity m must be positive"));
        }
        let need_b = |min: u32| -> Result<u32> {
            let b = b.ok_or_else(|| Error::invalid(format!("type {tag} needs b")))?;
            if b < min {
                return Err(Error::invalid(format!("type {tag} needs b >= {min}")));
            }
            Ok(b)
        };
        let t = match tag {
            "mI0" | "I0" => KodairaType::MultipleI0 { m },
            "mI1" | "I1" => KodairaType::MultipleI1 { m },
            "mI2" | "I2" => KodairaType::MultipleI2 { m },
            "mIb" | "Ib" => KodairaType::MultipleIb { m, b: need_b(3)? },
            "I0star" => KodairaType::IStar { b: 0 },
            "Ibstar" => KodairaType::IStar { b: need_b(1)? },
            "II" => KodairaType::II,
            "III" => KodairaType::III,
            "IV" => KodairaType::IV,
            "IIstar" => KodairaType::IIStar,
            "IIIstar" => KodairaType::IIIStar,
            "IVstar" => KodairaType::IVStar,
            other => {
                // Accept concrete forms like "I5" or "I3star".
                if let Some(rest) = other.strip_prefix('I') {
                    if let Some(num) = rest.strip_suffix("star") {
                        if let Ok(b) = num.parse::<u32>() {
                            return Ok(KodairaType::IStar { b });
                        }
                    } else if let Ok(b) = rest.parse::<u32>() {
                        return Ok(match b {
                            0 => KodairaType::MultipleI0 { m },
                            1 => KodairaType::MultipleI1 { m },
                            2 => KodairaType::MultipleI2 { m },
                            b => KodairaType::MultipleIb { m, b },
                        });
                    }
                }
                return Err(Error::invalid(format!("unknown Kodaira type tag {other:?}")));
            }
        };
        Ok(t)
    }

    pub fn tag(&self) -> String {
        match self {
            KodairaType::MultipleI0 { m } => format!("{m}I0"),
            KodairaType::MultipleI1 { m } => format!("{m}I1"),
            KodairaType::MultipleI2 { m } => format!("{m}I2"),
            KodairaType::MultipleIb { m, b } => format!("{m}I{b}"),
            KodairaType::IStar { b } => format!("I{b}*"),
            KodairaType::II => "II".into(),
            KodairaType::III => "III".into(),
            KodairaType::IV => "IV".into(),
            KodairaType::IIStar => "II*".into(),
            KodairaType::IIIStar => "III*".into(),
            KodairaType::IVStar => "IV*".into(),
        }
    }

    /// The classical `(β, N)` for this fiber type, as tabulated for minimal
    /// elliptic surfaces. Independent of [`kodaira_resolution`]; used as the
    /// oracle it is checked against.
    pub fn tabulated_profile(&self) -> AsymptoticProfile {
        let r = |p: u64, q: u64| Rational::new(p, q);
        let (beta, log_power) = match *self {
            KodairaType::MultipleI0 { m } => (r(1, m.into()), 1),
            KodairaType::MultipleI1 { m } => (r(1, m.into()), 2),
            KodairaType::MultipleI2 { m } => (r(1, m.into()), 2),
            KodairaType::MultipleIb { m, .. } => (r(1, m.into()), 2),
            KodairaType::IStar { b: 0 } => (r(1, 2), 1),
            KodairaType::IStar { .. } => (r(1, 2), 2),
            KodairaType::II => (r(5, 6), 1),
            KodairaType::III => (r(3, 4), 1),
            KodairaType::IV => (r(2, 3), 1),
            KodairaType::IIStar => (r(1, 6), 1),
            KodairaType::IIIStar => (r(1, 4), 1),
            KodairaType::IVStar => (r(1, 3), 1),
        };
        AsymptoticProfile { beta, log_power }
    }
}

fn ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("E{i}")).collect()
}

fn chain_faces(names: &[String], links: &[(usize, usize)]) -> Vec<Vec<String>> {
    links
        .iter()
        .map(|&(i, j)| vec![names[i].clone(), names[j].clone()])
        .collect()
}

/// Resolution data of the central fiber for a Kodaira type. Normal-crossing
/// types are their own resolution (all discrepancies zero); types II, III, IV,
/// mI_1 and mI_2 carry the blow-up resolutions with their discrepancies.
pub fn kodaira_resolution(kind: KodairaType) -> Result<ResolutionData> {
    let build = |spec: &[(u32, u32)], links: &[(usize, usize)]| {
        let names = ids(spec.len());
        let divisors = spec
            .iter()
            .zip(&names)
            .map(|(&(a, k), id)| DivisorRecord::new(id.clone(), a, k))
            .collect();
        let nerve = if links.is_empty() {
            names.iter().map(|n| vec![n.clone()]).collect()
        } else {
            chain_faces(&names, links)
        };
        ResolutionData::new(2, divisors, nerve)
    };
    match kind {
        KodairaType::MultipleI0 { m } => build(&[(m, 0)], &[]),
        KodairaType::MultipleI1 { m } => build(&[(m, 0), (2 * m, 1)], &[(0, 1)]),
        KodairaType::MultipleI2 { m } => build(
            &[(m, 0), (m, 0), (2 * m, 1), (2 * m, 1)],
            &[(0, 2), (0, 3), (1, 2), (1, 3)],
        ),
        KodairaType::MultipleIb { m, b } => {
            if b < 3 {
                return Err(Error::invalid("mI_b cycles need b >= 3"));
            }
            let b = b as usize;
            let spec = vec![(m, 0); b];
            let links: Vec<_> = (0..b).map(|i| (i, (i + 1) % b)).collect();
            build(&spec, &links)
        }
        KodairaType::IStar { b } => {
            // Four reduced ends, a chain of b + 1 double components.
            let chain = b as usize + 1;
            let mut spec = vec![(1, 0); 4];
            spec.extend(std::iter::repeat((2, 0)).take(chain));
            let first = 4;
            let last = 4 + chain - 1;
            let mut links = vec![(0, first), (1, first)];
            links.extend((first..last).map(|i| (i, i + 1)));
            links.push((2, last));
            links.push((3, last));
            build(&spec, &links)
        }
        KodairaType::II => build(
            &[(1, 0), (2, 1), (3, 2), (6, 4)],
            &[(0, 3), (1, 3), (2, 3)],
        ),
        KodairaType::III => build(
            &[(1, 0), (1, 0), (2, 1), (4, 2)],
            &[(0, 3), (1, 3), (2, 3)],
        ),
        KodairaType::IV => build(
            &[(1, 0), (1, 0), (1, 0), (3, 1)],
            &[(0, 3), (1, 3), (2, 3)],
        ),
        KodairaType::IIStar => build(
            &[
                (1, 0),
                (2, 0),
                (3, 0),
                (4, 0),
                (5, 0),
                (6, 0),
                (4, 0),
                (2, 0),
                (3, 0),
            ],
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (5, 8)],
        ),
        KodairaType::IIIStar => build(
            &[(1, 0), (2, 0), (3, 0), (4, 0), (3, 0), (2, 0), (1, 0), (2, 0)],
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (3, 7)],
        ),
        KodairaType::IVStar => build(
            &[(3, 0), (2, 0), (1, 0), (2, 0), (1, 0), (2, 0), (1, 0)],
            &[(0, 1), (1, 2), (0, 3), (3, 4), (0, 5), (5, 6)],
        ),
    }
}

/// One representative of every row of the Kodaira table, with the
/// multiple-fiber rows expanded over the given multiplicities.
pub fn kodaira_sweep(multiplicities: &[u32]) -> Vec<KodairaType> {
    let mut out = Vec::new();
    for &m in multiplicities {
        out.push(KodairaType::MultipleI0 { m });
        out.push(KodairaType::MultipleI1 { m });
        out.push(KodairaType::MultipleI2 { m });
        for b in [3, 4, 7] {
            out.push(KodairaType::MultipleIb { m, b });
        }
    }
    out.push(KodairaType::IStar { b: 0 });
    for b in [1, 2, 5] {
        out.push(KodairaType::IStar { b });
    }
    out.extend([
        KodairaType::II,
        KodairaType::III,
        KodairaType::IV,
        KodairaType::IIStar,
        KodairaType::IIIStar,
        KodairaType::IVStar,
    ]);
    out
}

impl FromStr for KodairaType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        KodairaType::from_tag(s, None, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn data(spec: &[(u32, u32)], faces: &[&[usize]]) -> ResolutionData {
        let names = ids(spec.len());
        ResolutionData::new(
            2,
            spec.iter()
                .zip(&names)
                .map(|(&(a, k), id)| DivisorRecord::new(id.clone(), a, k))
                .collect(),
            faces
                .iter()
                .map(|f| f.iter().map(|&i| names[i].clone()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn type_ii_threshold() {
        let d = data(&[(1, 0), (2, 1), (3, 2), (6, 4)], &[&[0, 3], &[1, 3], &[2, 3]]);
        assert_eq!(lct(&d).unwrap(), Rational::new(5, 6));
        assert_eq!(log_multiplicity(&d).unwrap(), 1);
    }

    #[test]
    fn smooth_reduced_fiber() {
        let d = data(&[(1, 0)], &[&[0]]);
        assert_eq!(lct(&d).unwrap(), Rational::from_integer(1));
        assert_eq!(log_multiplicity(&d).unwrap(), 1);
    }

    #[test]
    fn triple_nodal_fiber() {
        let d = data(&[(3, 0), (6, 1)], &[&[0, 1]]);
        assert_eq!(lct(&d).unwrap(), Rational::new(1, 3));
        assert_eq!(log_multiplicity(&d).unwrap(), 2);
    }

    #[test]
    fn mi2_with_listed_faces() {
        let m = 4;
        let d = data(
            &[(m, 0), (m, 0), (2 * m, 1), (2 * m, 1)],
            &[&[0, 2], &[2, 3], &[1, 3]],
        );
        assert_eq!(log_multiplicity(&d).unwrap(), 2);
    }

    #[test]
    fn i0_star_is_single_log_power() {
        let d = kodaira_resolution(KodairaType::IStar { b: 0 }).unwrap();
        assert_eq!(d.divisors.iter().map(|d| d.multiplicity).collect::<Vec<_>>(), vec![1, 1, 1, 1, 2]);
        assert!(d.divisors.iter().all(|d| d.discrepancy == 0));
        assert_eq!(log_multiplicity(&d).unwrap(), 1);
    }

    #[test]
    fn resolutions_match_listed_records() {
        let ii = kodaira_resolution(KodairaType::II).unwrap();
        let ak: Vec<_> = ii.divisors.iter().map(|d| (d.multiplicity, d.discrepancy)).collect();
        assert_eq!(ak, vec![(1, 0), (2, 1), (3, 2), (6, 4)]);
        let iv = kodaira_resolution(KodairaType::IV).unwrap();
        let ak: Vec<_> = iv.divisors.iter().map(|d| (d.multiplicity, d.discrepancy)).collect();
        assert_eq!(ak, vec![(1, 0), (1, 0), (1, 0), (3, 1)]);
        let cyc = kodaira_resolution(KodairaType::MultipleIb { m: 2, b: 5 }).unwrap();
        assert!(cyc.divisors.iter().all(|d| d.multiplicity == 2 && d.discrepancy == 0));
        let p = asymptotic_profile(&cyc).unwrap();
        assert_eq!(p.beta, Rational::new(1, 2));
        assert_eq!(p.log_power, 2);
    }

    #[test]
    fn whole_table_matches() {
        for kind in kodaira_sweep(&[1, 2, 3, 5]) {
            let d = kodaira_resolution(kind).unwrap();
            assert_eq!(asymptotic_profile(&d).unwrap(), kind.tabulated_profile(), "{}", kind.tag());
        }
    }

    #[test]
    fn validation_errors() {
        let bad_member = ResolutionData::new(
            2,
            vec![DivisorRecord::new("E1", 1, 0)],
            vec![vec!["E9".into()]],
        );
        assert!(bad_member.is_err());
        let uncovered = ResolutionData::new(
            2,
            vec![DivisorRecord::new("E1", 1, 0), DivisorRecord::new("E2", 1, 0)],
            vec![vec!["E1".into()]],
        );
        assert!(uncovered.is_err());
        let too_big = ResolutionData::new(
            2,
            vec![
                DivisorRecord::new("A", 1, 0),
                DivisorRecord::new("B", 1, 0),
                DivisorRecord::new("C", 1, 0),
            ],
            vec![vec!["A".into(), "B".into(), "C".into()]],
        );
        assert!(too_big.is_err());
        let empty = ResolutionData {
            ambient_dimension: 2,
            divisors: vec![],
            nerve: vec![],
        };
        assert!(lct(&empty).is_err());
        assert!(KodairaType::from_tag("V", None, None).is_err());
    }

    #[test]
    fn json_round_trip_and_schema() {
        let text = r#"{"dimension": 2,
            "divisors": [{"id":"E1","a":1,"k":0},{"id":"E2","a":2,"k":1},{"id":"E3","a":3,"k":2},{"id":"E4","a":6,"k":4}],
            "nerve": [["E1","E4"],["E2","E4"],["E3","E4"]]}"#;
        let d = ResolutionData::from_json(text).unwrap();
        assert_eq!(asymptotic_profile(&d).unwrap().to_string(), "beta=5/6 N=1");
        assert_eq!(ResolutionData::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("10/12").unwrap(), Rational::new(5, 6));
        assert_eq!(parse_rational("3").unwrap(), Rational::from_integer(3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    fn arb_data() -> impl Strategy<Value = ResolutionData> {
        (2u32..5, prop::collection::vec((1u32..12, 0u32..6), 1..7)).prop_flat_map(|(n, spec)| {
            let len = spec.len();
            prop::collection::vec(prop::collection::btree_set(0..len, 1..=(n as usize).min(len)), 0..6)
                .prop_map(move |faces| {
                    let names = ids(len);
                    let mut nerve: Vec<Vec<String>> = faces
                        .iter()
                        .map(|f| f.iter().map(|&i| names[i].clone()).collect())
                        .collect();
                    for name in &names {
                        if !nerve.iter().any(|f| f.contains(name)) {
                            nerve.push(vec![name.clone()]);
                        }
                    }
                    ResolutionData::new(
                        n,
                        spec.iter()
                            .zip(&names)
                            .map(|(&(a, k), id)| DivisorRecord::new(id.clone(), a, k))
                            .collect(),
                        nerve,
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn beta_positive_and_n_bounded(d in arb_data()) {
            let p = asymptotic_profile(&d).unwrap();
            prop_assert!(p.beta > Rational::from_integer(0));
            prop_assert!(p.log_power >= 1);
            prop_assert!(p.log_power <= d.ambient_dimension);
            let largest = d.nerve.iter().map(Vec::len).max().unwrap() as u32;
            prop_assert!(p.log_power <= largest);
        }

        #[test]
        fn scaling_multiplicities_divides_beta(d in arb_data(), m in 1u32..7) {
            let mut scaled = d.clone();
            for div in &mut scaled.divisors {
                div.multiplicity *= m;
            }
            let p = asymptotic_profile(&d).unwrap();
            let q = asymptotic_profile(&scaled).unwrap();
            prop_assert_eq!(q.beta * Rational::from_integer(m.into()), p.beta);
            prop_assert_eq!(q.log_power, p.log_power);
        }
    }
}
