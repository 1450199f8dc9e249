//! Statistics behind the figures: gradient-norm histograms, a two-component
//! PCA, SNP–label correlations and the attack radar table.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::attacks::{AttackKind, AttackResult, GradientRecord};
use crate::linmodel::{dot, l2_norm, FeatureMatrix};
use crate::synthgen::GenomicDataset;
use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `k + 1` strictly increasing edges; bins are right-open except the last.
    pub bin_edges: Vec<f64>,
    pub member_counts: Vec<u64>,
    pub nonmember_counts: Vec<u64>,
    /// All values were equal; a single unit-width bin centred on them is used.
    pub degenerate: bool,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.member_counts.len()
    }

    /// Bin index of `v` under the right-open / last-closed rule.
    pub fn bin_of(&self, v: f64) -> usize {
        let interior = &self.bin_edges[1..self.bin_edges.len() - 1];
        interior.partition_point(|&e| e <= v)
    }
}

/// Shared equal-width bins over `[min, max]` of both groups.
pub fn histogram(members: &[f64], non_members: &[f64], n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    let all = || members.iter().chain(non_members);
    let lo = all().copied().fold(f64::INFINITY, f64::min);
    let hi = all().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::EmptyInput("histogram values"));
    }
    let (bin_edges, degenerate) = if lo == hi {
        (vec![lo - 0.5, lo + 0.5], true)
    } else {
        let width = (hi - lo) / n_bins as f64;
        let mut edges: Vec<f64> = (0..n_bins).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        (edges, false)
    };
    let k = bin_edges.len() - 1;
    let mut h = Histogram {
        bin_edges,
        member_counts: vec![0; k],
        nonmember_counts: vec![0; k],
        degenerate,
    };
    for &v in members {
        let b = h.bin_of(v);
        h.member_counts[b] += 1;
    }
    for &v in non_members {
        let b = h.bin_of(v);
        h.nonmember_counts[b] += 1;
    }
    Ok(h)
}

pub fn gradient_norm_histogram(records: &[GradientRecord], n_bins: usize) -> Result<Histogram> {
    if records.is_empty() {
        return Err(Error::EmptyInput("gradient records"));
    }
    let members: Vec<f64> = records.iter().filter(|r| r.is_member).map(|r| r.norm).collect();
    let non_members: Vec<f64> = records.iter().filter(|r| !r.is_member).map(|r| r.norm).collect();
    histogram(&members, &non_members, n_bins)
}

/// Column means and the `1/(n-1)` covariance matrix (row-major `d x d`).
pub fn covariance(x: &FeatureMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, d) = (x.n_rows(), x.n_cols());
    if n < 2 {
        return Err(Error::EmptyInput("covariance needs at least two rows"));
    }
    let mut mean = vec![0.0; d];
    for row in x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    let mut centred = vec![0.0; d];
    for row in x.rows() {
        for j in 0..d {
            centred[j] = row[j] - mean[j];
        }
        for i in 0..d {
            let ci = centred[i];
            for j in i..d {
                cov[i * d + j] += ci * centred[j];
            }
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] * scale;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Ok((mean, cov))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    /// Residual tolerance, relative to the Frobenius norm of the matrix.
    pub tol: f64,
    pub max_iter: usize,
    /// Repeated squarings used to build the starting vector.
    pub warm_squarings: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-10,
            max_iter: 10_000,
            warm_squarings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

fn mat_vec(a: &[f64], n: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..n {
        out[i] = dot(&a[i * n..(i + 1) * n], v);
    }
}

fn mat_square(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * a[k * n + j];
            }
        }
    }
    out
}

fn orthogonalise(v: &mut [f64], basis: &[EigenPair]) {
    for b in basis {
        let c = dot(v, &b.vector);
        for (x, y) in v.iter_mut().zip(&b.vector) {
            *x -= c * y;
        }
    }
}

fn normalise(v: &mut [f64]) -> f64 {
    let n = l2_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Flip the sign so the largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Deterministic start vector that is not orthogonal to anything simple.
fn start_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| 1.0 + libm::sqrt((i + 1) as f64) * 1e-3).collect()
}

/// Leading `k` eigenpairs of the symmetric `n x n` matrix `a` by power
/// iteration with deflation.
///
/// Each pair starts from `a^(2^s) v0` (repeated squaring of the deflated
/// matrix) and is then refined by plain power steps until the residual
/// `|Av - (v'Av) v|` drops below `tol * |a|_F`.
pub fn power_eigenpairs(a: &[f64], n: usize, k: usize, opts: &PowerOptions) -> Result<Vec<EigenPair>> {
    if a.len() != n * n {
        return Err(Error::Shape {
            expected: n * n,
            actual: a.len(),
        });
    }
    if k > n {
        return Err(Error::config(format!(
            "cannot extract {k} eigenpairs from a {n}x{n} matrix"
        )));
    }
    let scale = l2_norm(a);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    let mut deflated = a.to_vec();
    let mut av = vec![0.0; n];
    for _ in 0..k {
        let mut v = start_vector(n);
        orthogonalise(&mut v, &pairs);
        normalise(&mut v);

        if scale > 0.0 {
            let mut b = deflated.clone();
            for _ in 0..opts.warm_squarings {
                let fro = normalise(&mut b);
                if fro == 0.0 {
                    break;
                }
                b = mat_square(&b, n);
            }
            mat_vec(&b, n, &v, &mut av);
            orthogonalise(&mut av, &pairs);
            if normalise(&mut av) > 0.0 {
                v.copy_from_slice(&av);
            }
        }

        let mut converged = false;
        let mut value = 0.0;
        for _ in 0..opts.max_iter {
            mat_vec(&deflated, n, &v, &mut av);
            orthogonalise(&mut av, &pairs);
            value = dot(&v, &av);
            let residual = l2_norm(&av.iter().zip(&v).map(|(x, y)| x - value * y).collect::<Vec<_>>());
            if residual <= opts.tol * scale.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
            if normalise(&mut av) == 0.0 {
                // v spans part of the null space of the deflated matrix
                value = 0.0;
                converged = true;
                break;
            }
            v.copy_from_slice(&av);
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: opts.max_iter,
            });
        }
        fix_sign(&mut v);
        for i in 0..n {
            for j in 0..n {
                deflated[i * n + j] -= value * v[i] * v[j];
            }
        }
        pairs.push(EigenPair { value, vector: v });
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    /// `(pc1, pc2)` per row.
    pub coords: Vec<[f64; 2]>,
    pub labels: Vec<u8>,
}

impl PcaProjection {
    /// `mean + coords * components` for row `i`.
    pub fn reconstruct(&self, i: usize) -> Vec<f64> {
        let [a, b] = self.coords[i];
        self.mean
            .iter()
            .zip(self.components[0].iter().zip(&self.components[1]))
            .map(|(m, (c0, c1))| m + a * c0 + b * c1)
            .collect()
    }
}

/// Two-component PCA of unscaled features via the covariance matrix.
pub fn pca_2d(x: &FeatureMatrix, labels: &[u8]) -> Result<PcaProjection> {
    pca_2d_with(x, labels, &PowerOptions::default())
}

pub fn pca_2d_with(x: &FeatureMatrix, labels: &[u8], opts: &PowerOptions) -> Result<PcaProjection> {
    if x.n_rows() < 3 || x.n_cols() < 2 {
        return Err(Error::config("PCA needs at least 3 rows and 2 columns"));
    }
    if labels.len() != x.n_rows() {
        return Err(Error::Shape {
            expected: x.n_rows(),
            actual: labels.len(),
        });
    }
    let d = x.n_cols();
    let (mean, cov) = covariance(x)?;
    let mut pairs = power_eigenpairs(&cov, d, 2, opts)?;
    let second = pairs.pop().expect("two pairs requested");
    let first = pairs.pop().expect("two pairs requested");
    let mut centred = vec![0.0; d];
    let coords = x
        .rows()
        .map(|row| {
            for j in 0..d {
                centred[j] = row[j] - mean[j];
            }
            [dot(&centred, &first.vector), dot(&centred, &second.vector)]
        })
        .collect();
    Ok(PcaProjection {
        mean,
        explained_variance: [first.value.max(0.0), second.value.max(0.0)],
        components: [first.vector, second.vector],
        coords,
        labels: labels.to_vec(),
    })
}

pub fn pca_dataset(ds: &GenomicDataset) -> Result<PcaProjection> {
    let rows: Vec<usize> = (0..ds.n_samples()).collect();
    pca_2d(&ds.features(&rows), ds.labels())
}

/// Pearson r by the centred definition; `None` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson r as sample covariance over the product of standard deviations,
/// from raw moments.
pub fn pearson_moments(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx = x.iter().map(|a| a * a).sum::<f64>();
    let syy = y.iter().map(|b| b * b).sum::<f64>();
    let sxy = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let cov = (sxy - sx * sy / n) / (n - 1.0);
    let vx = (sxx - sx * sx / n) / (n - 1.0);
    let vy = (syy - sy * sy / n) / (n - 1.0);
    if vx <= 0.0 || vy <= 0.0 {
        return None;
    }
    Some((cov / (libm::sqrt(vx) * libm::sqrt(vy))).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    /// Pearson r per SNP, 0 for constant SNPs.
    pub r: Vec<f64>,
    pub zero_variance: Vec<bool>,
    /// SNP indices with the largest |r|, descending; ties keep the lower index.
    pub top_k: Vec<usize>,
}

impl CorrelationTable {
    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn snp_label_correlations(ds: &GenomicDataset, k: usize) -> Result<CorrelationTable> {
    let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    let positives = ds.labels().iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == ds.n_samples() {
        return Err(Error::Evaluation(String::from("labels must contain both classes")));
    }
    let mut r = Vec::with_capacity(ds.n_snps());
    let mut zero_variance = Vec::with_capacity(ds.n_snps());
    for j in 0..ds.n_snps() {
        let x: Vec<f64> = ds.snp_column(j).iter().map(|&g| f64::from(g)).collect();
        match pearson(&x, &y) {
            Some(v) => {
                r.push(v);
                zero_variance.push(false);
            }
            None => {
                r.push(0.0);
                zero_variance.push(true);
            }
        }
    }
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[b].abs().total_cmp(&r[a].abs()));
    order.truncate(k.min(r.len()));
    Ok(CorrelationTable {
        r,
        zero_variance,
        top_k: order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarRow {
    pub attack: AttackKind,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&AttackResult> for RadarRow {
    fn from(r: &AttackResult) -> Self {
        RadarRow {
            attack: r.attack,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
        }
    }
}

/// Attack x {precision, recall, f1}, rows in canonical attack order.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarTable {
    pub rows: Vec<RadarRow>,
}

impl RadarTable {
    pub fn get(&self, attack: AttackKind) -> Option<&RadarRow> {
        self.rows.iter().find(|r| r.attack == attack)
    }
}

fn canonical(rows: &[RadarRow]) -> Result<Vec<RadarRow>> {
    let mut out: Vec<RadarRow> = Vec::with_capacity(rows.len());
    for kind in AttackKind::ALL {
        let mut matching = rows.iter().filter(|r| r.attack == kind);
        if let Some(r) = matching.next() {
            if matching.next().is_some() {
                return Err(Error::config(format!("more than one radar row for {kind}")));
            }
            out.push(*r);
        }
    }
    Ok(out)
}

/// Requires exactly one row for each of the three attacks.
pub fn radar_table(rows: &[RadarRow]) -> Result<RadarTable> {
    let out = canonical(rows)?;
    if out.len() != AttackKind::ALL.len() {
        let missing: Vec<&str> = AttackKind::ALL
            .iter()
            .filter(|k| out.iter().all(|r| r.attack != **k))
            .map(|k| k.as_str())
            .collect();
        return Err(Error::Incomplete(missing.join(", ")));
    }
    Ok(RadarTable { rows: out })
}

/// Like [`radar_table`] but accepts any subset of attacks.
pub fn radar_table_partial(rows: &[RadarRow]) -> Result<RadarTable> {
    canonical(rows).map(|rows| RadarTable { rows })
}

/// Highest-F1 row per attack type (first occurrence wins ties).
pub fn best_per_attack(rows: &[RadarRow]) -> Vec<RadarRow> {
    AttackKind::ALL
        .iter()
        .filter_map(|k| {
            rows.iter()
                .filter(|r| r.attack == *k)
                .fold(None, |best: Option<&RadarRow>, r| match best {
                    Some(b) if b.f1 >= r.f1 => Some(b),
                    _ => Some(r),
                })
                .copied()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn histogram_arithmetic() {
        let h = histogram(&[0.0, 1.0], &[2.0, 3.0], 2).unwrap();
        assert_eq!(h.bin_edges, vec![0.0, 1.5, 3.0]);
        assert_eq!(h.member_counts, vec![2, 0]);
        assert_eq!(h.nonmember_counts, vec![0, 2]);
        assert!(!h.degenerate);
    }

    #[test]
    fn histogram_of_equal_values_is_single_bin() {
        let h = histogram(&[0.4, 0.4], &[0.4], 10).unwrap();
        assert!(h.degenerate);
        assert_eq!(h.n_bins(), 1);
        assert_eq!((h.member_counts[0], h.nonmember_counts[0]), (2, 1));
    }

    #[test]
    fn histogram_rejects_empty() {
        assert!(histogram(&[], &[], 3).is_err());
        assert!(histogram(&[1.0], &[], 0).is_err());
    }

    #[test]
    fn collinear_points_give_diagonal_component() {
        let data: Vec<f64> = (0..6).flat_map(|i| [i as f64, i as f64]).collect();
        let x = FeatureMatrix::new(data, 2).unwrap();
        let p = pca_2d(&x, &[0, 1, 0, 1, 0, 1]).unwrap();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((p.components[0][0] - s).abs() < 1e-10 && (p.components[0][1] - s).abs() < 1e-10);
        assert!(p.explained_variance[1].abs() < 1e-10);
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-10);
    }

    #[test]
    fn two_point_perfect_correlation() {
        assert!((pearson(&[0.0, 2.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn constant_snp_flagged() {
        let ds = GenomicDataset::new(vec![1, 0, 1, 2, 1, 1, 1, 0], vec![0, 1, 1, 0], vec![0; 4], 2, 1).unwrap();
        let t = snp_label_correlations(&ds, 2).unwrap();
        assert_eq!(t.zero_variance, vec![true, false]);
        assert_eq!(t.r[0], 0.0);
        assert_eq!(t.top_k, vec![1, 0]);
        let single = GenomicDataset::new(vec![1, 0], vec![1, 1], vec![0; 2], 1, 1).unwrap();
        assert!(matches!(snp_label_correlations(&single, 1), Err(Error::Evaluation(_))));
    }

    #[test]
    fn radar_canonicalises_and_checks_completeness() {
        let rows = [
            RadarRow {
                attack: AttackKind::LabelInference,
                precision: 0.526,
                recall: 0.526,
                f1: 0.524,
            },
            RadarRow {
                attack: AttackKind::Mia,
                precision: 0.79,
                recall: 0.51,
                f1: 0.62,
            },
            RadarRow {
                attack: AttackKind::GradientMia,
                precision: 0.79,
                recall: 0.97,
                f1: 0.87,
            },
        ];
        let t = radar_table(&rows).unwrap();
        let order: Vec<AttackKind> = t.rows.iter().map(|r| r.attack).collect();
        assert_eq!(order, AttackKind::ALL.to_vec());
        let mut reversed = rows;
        reversed.reverse();
        assert_eq!(radar_table(&reversed).unwrap(), t);
        assert!(matches!(radar_table(&rows[..2]), Err(Error::Incomplete(m)) if m == "gradient_mia"));
        assert!(radar_table(&[rows[0], rows[0], rows[1], rows[2]]).is_err());
        assert_eq!(radar_table_partial(&rows[..2]).unwrap().rows.len(), 2);
    }

    #[test]
    fn best_per_attack_prefers_first_on_ties() {
        let mk = |attack, f1, precision| RadarRow {
            attack,
            precision,
            recall: 0.0,
            f1,
        };
        let rows = [
            mk(AttackKind::Mia, 0.5, 0.1),
            mk(AttackKind::Mia, 0.6, 0.2),
            mk(AttackKind::Mia, 0.6, 0.3),
        ];
        assert_eq!(best_per_attack(&rows), vec![rows[1]]);
    }

    proptest! {
        #[test]
        fn histogram_is_a_partition(
            members in proptest::collection::vec(-5.0f64..5.0, 1..60),
            non_members in proptest::collection::vec(-5.0f64..5.0, 0..60),
            bins in 1usize..12,
        ) {
            let h = histogram(&members, &non_members, bins).unwrap();
            prop_assert_eq!(h.member_counts.iter().sum::<u64>(), members.len() as u64);
            prop_assert_eq!(h.nonmember_counts.iter().sum::<u64>(), non_members.len() as u64);
            prop_assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
            for &v in members.iter().chain(&non_members) {
                let b = h.bin_of(v);
                prop_assert!(h.bin_edges[b] <= v);
                prop_assert!(v < h.bin_edges[b + 1] || (b + 1 == h.n_bins() && v <= h.bin_edges[b + 1]));
            }
        }

        #[test]
        fn pearson_formulas_agree(
            x in proptest::collection::vec(0u8..3, 5..200),
            seed in 0u64..1000,
        ) {
            let xf: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
            let y: Vec<f64> = (0..x.len()).map(|i| ((i as u64 * 2654435761 + seed) % 2) as f64).collect();
            match (pearson(&xf, &y), pearson_moments(&xf, &y)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b),
                (None, None) => {}
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
        }
    }
}
