//! One-nearest-neighbour evaluation under invariant and baseline metrics.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use tsa_core::data::{tangent_vector, Image, LabeledSet};
use tsa_core::inference::stabilizer_representation;
use tsa_core::metrics::{
    manifold_distance_coupled_sq_decomposed, manifold_distance_maximal_sq_decomposed,
    tangent_distance_sq_diff, Decomposed,
};
use tsa_core::toral::ToralBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Euclidean distance between raw vectors.
    Ed,
    /// Two-sided tangent distance with rotational tangents.
    Td,
    /// Euclidean distance between `√κ̂` vectors (Hellinger space).
    Kappa,
    /// Manifold distance for the maximal torus.
    MdMax,
    /// Manifold distance for the coupled subgroup.
    MdCoupled,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Ed,
        Metric::Td,
        Metric::Kappa,
        Metric::MdMax,
        Metric::MdCoupled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ed => "ed",
            Metric::Td => "td",
            Metric::Kappa => "kappa",
            Metric::MdMax => "md-max",
            Metric::MdCoupled => "md-coupled",
        }
    }

    pub fn needs_model(self) -> bool {
        matches!(self, Metric::Kappa | Metric::MdMax | Metric::MdCoupled)
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Metric::ALL.iter().map(|m| m.name()).collect();
                format!("unknown metric '{s}' (expected one of {})", names.join(", "))
            })
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnReport {
    pub metric: Metric,
    pub errors: usize,
    pub total: usize,
}

impl KnnReport {
    pub fn error_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.errors as f64 / self.total as f64
        }
    }
}

pub fn reports_csv(reports: &[KnnReport]) -> String {
    let mut out = String::from("metric,errors,total,error_rate\n");
    for r in reports {
        let _ = writeln!(out, "{},{},{},{}", r.metric, r.errors, r.total, r.error_rate());
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum KnnError {
    #[error("metric {0} requires a model")]
    ModelRequired(Metric),
    #[error("training and test vectors differ in length ({train} vs {test})")]
    DimensionMismatch { train: usize, test: usize },
    #[error(transparent)]
    Core(#[from] tsa_core::TsaError),
}

/// Per-item representation a metric compares.
enum Features {
    Raw(Vec<Vec<f64>>),
    Tangent(Vec<(Vec<f64>, Vec<f64>)>),
    Decomposed(Vec<Decomposed>),
}

fn features(metric: Metric, basis: Option<&ToralBasis>, set: &LabeledSet) -> Result<Features, KnnError> {
    let items = 0..set.len();
    Ok(match metric {
        Metric::Ed => Features::Raw(items.map(|i| set.item(i).to_vec()).collect()),
        Metric::Td => Features::Tangent(
            items
                .into_par_iter()
                .map(|i| {
                    let img = Image::square(set.side(), set.item(i).to_vec())?;
                    let t = tangent_vector(&img)?.into_data();
                    Ok((img.into_data(), t))
                })
                .collect::<tsa_core::Result<_>>()?,
        ),
        Metric::Kappa => {
            let basis = basis.ok_or(KnnError::ModelRequired(metric))?;
            Features::Raw(
                items
                    .into_par_iter()
                    .map(|i| stabilizer_representation(basis, set.item(i)).map(|r| r.sqrt()))
                    .collect::<tsa_core::Result<_>>()?,
            )
        }
        Metric::MdMax | Metric::MdCoupled => {
            let basis = basis.ok_or(KnnError::ModelRequired(metric))?;
            Features::Decomposed(
                items
                    .into_par_iter()
                    .map(|i| Decomposed::new(basis, set.item(i)))
                    .collect::<tsa_core::Result<_>>()?,
            )
        }
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Index of the nearest admissible candidate; ties go to the lowest index.
fn argmin(n: usize, skip: Option<usize>, mut dist: impl FnMut(usize) -> f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for r in (0..n).filter(|&r| Some(r) != skip) {
        let d = dist(r);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, r));
        }
    }
    best.map(|(_, r)| r)
}

/// Coupled nearest neighbour, pruned by the maximal-torus distance.
///
/// Coupled orbits lie inside maximal-torus orbits, so the maximal manifold
/// distance bounds the coupled one from below; candidates are visited in
/// order of that bound and the scan stops once it exceeds the best distance.
fn argmin_coupled(
    basis: &ToralBasis,
    train: &[Decomposed],
    x: &Decomposed,
    skip: Option<usize>,
) -> Option<usize> {
    let mut order: Vec<(f64, usize)> = (0..train.len())
        .filter(|&r| Some(r) != skip)
        .map(|r| (manifold_distance_maximal_sq_decomposed(x, &train[r]), r))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, usize)> = None;
    for (lower, r) in order {
        if let Some((bd, _)) = best {
            // lower bounds are approximate at rounding level
            if lower > bd * (1.0 + 1e-9) + 1e-12 {
                break;
            }
        }
        let d = manifold_distance_coupled_sq_decomposed(basis, x, &train[r]);
        best = match best {
            Some((bd, br)) if d > bd || (d == bd && r > br) => Some((bd, br)),
            _ => Some((d, r)),
        };
    }
    best.map(|(_, r)| r)
}

/// Nearest training index for each test item. With `exclude_self`, test
/// item `i` never matches training item `i`.
pub fn nearest_neighbors(
    metric: Metric,
    basis: Option<&ToralBasis>,
    train: &LabeledSet,
    test: &LabeledSet,
    exclude_self: bool,
) -> Result<Vec<Option<usize>>, KnnError> {
    if !train.is_empty() && !test.is_empty() && train.dim() != test.dim() {
        return Err(KnnError::DimensionMismatch {
            train: train.dim(),
            test: test.dim(),
        });
    }
    let tr = features(metric, basis, train)?;
    let te = features(metric, basis, test)?;
    let n = train.len();
    let skip = |i: usize| exclude_self.then_some(i);
    let nn = (0..test.len()).into_par_iter().map(|i| match (&tr, &te) {
        (Features::Raw(a), Features::Raw(b)) => argmin(n, skip(i), |r| sq_dist(&b[i], &a[r])),
        (Features::Tangent(a), Features::Tangent(b)) => {
            let (x, tx) = &b[i];
            let mut diff = vec![0.0; x.len()];
            argmin(n, skip(i), |r| {
                let (y, ty) = &a[r];
                for ((d, p), q) in diff.iter_mut().zip(x).zip(y) {
                    *d = p - q;
                }
                tangent_distance_sq_diff(&diff, tx, ty)
            })
        }
        (Features::Decomposed(a), Features::Decomposed(b)) => match metric {
            Metric::MdCoupled => argmin_coupled(basis.expect("checked by features"), a, &b[i], skip(i)),
            _ => argmin(n, skip(i), |r| manifold_distance_maximal_sq_decomposed(&b[i], &a[r])),
        },
        _ => unreachable!("train and test features share a metric"),
    });
    Ok(nn.collect())
}

pub fn evaluate(
    metric: Metric,
    basis: Option<&ToralBasis>,
    train: &LabeledSet,
    test: &LabeledSet,
    exclude_self: bool,
) -> Result<KnnReport, KnnError> {
    let nn = nearest_neighbors(metric, basis, train, test, exclude_self)?;
    let errors = nn
        .iter()
        .zip(test.labels())
        .filter(|(r, &label)| r.is_none_or(|r| train.labels()[r] != label))
        .count();
    Ok(KnnReport {
        metric,
        errors,
        total: test.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use tsa_core::data::rotate_image;

    fn set(items: &[Vec<f64>], labels: &[u8], side: usize) -> LabeledSet {
        let data = DMatrix::from_fn(side * side, items.len(), |r, c| items[c][r]);
        LabeledSet::new(side, data, labels.to_vec(), None).unwrap()
    }

    #[test]
    fn metric_names_roundtrip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("l1".parse::<Metric>().is_err());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = set(&[vec![1.0; 4], vec![1.0; 4], vec![0.0; 4]], &[0, 1, 2], 2);
        let q = set(&[vec![1.0; 4]], &[1], 2);
        let nn = nearest_neighbors(Metric::Ed, None, &s, &q, false).unwrap();
        assert_eq!(nn, vec![Some(0)]);
    }

    #[test]
    fn self_exclusion() {
        let s = set(&[vec![0.0; 4], vec![3.0; 4], vec![1.0; 4]], &[0, 1, 2], 2);
        assert_eq!(
            nearest_neighbors(Metric::Ed, None, &s, &s, false).unwrap(),
            vec![Some(0), Some(1), Some(2)]
        );
        assert_eq!(
            nearest_neighbors(Metric::Ed, None, &s, &s, true).unwrap(),
            vec![Some(2), Some(2), Some(0)]
        );
    }

    #[test]
    fn model_metrics_need_a_model() {
        let s = set(&[vec![0.0; 4]], &[0], 2);
        assert!(matches!(
            evaluate(Metric::MdCoupled, None, &s, &s, false),
            Err(KnnError::ModelRequired(Metric::MdCoupled))
        ));
    }

    #[test]
    fn pruned_coupled_search_matches_exhaustive() {
        use tsa_core::metrics::manifold_distance_coupled;
        let side = 6;
        let basis = {
            let mut rng = tsa_core::data::item_rng(4, 0);
            let w = tsa_core::toral::random_orthonormal(36, 12, &mut rng).unwrap();
            ToralBasis::new(w, vec![1, -2, 0, 3, 1, 2], 1.0).unwrap()
        };
        let imgs: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let img = Image::from_fn(side, side, |r, c| ((r * 7 + c * 3 + i * 5) % 11) as f64 / 10.0);
                rotate_image(&img, 0.3 * i as f64).unwrap().into_data()
            })
            .collect();
        let labels: Vec<u8> = (0..40).map(|i| (i % 3) as u8).collect();
        let train = set(&imgs[..30], &labels[..30], side);
        let test = set(&imgs[30..], &labels[30..], side);
        let nn = nearest_neighbors(Metric::MdCoupled, Some(&basis), &train, &test, false).unwrap();
        for (t, got) in nn.iter().enumerate() {
            let brute = argmin(30, None, |r| {
                manifold_distance_coupled(&basis, test.item(t), train.item(r)).unwrap().powi(2)
            });
            assert_eq!(*got, brute);
        }
    }

    #[test]
    fn identical_sets_have_zero_error() {
        let imgs: Vec<Vec<f64>> = (0..12).map(|i| (0..16).map(|p| ((p * (i + 1)) % 13) as f64).collect()).collect();
        let labels: Vec<u8> = (0..12).map(|i| (i % 4) as u8).collect();
        let s = set(&imgs, &labels, 4);
        for m in [Metric::Ed, Metric::Td] {
            assert_eq!(evaluate(m, None, &s, &s, false).unwrap().errors, 0);
        }
    }
}
