//! Binned distributions over annual consumption values and the divergences
//! used to compare them. Divergences are in nats.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How to construct bin edges over a pooled sample range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningSpec {
    /// A fixed number of equal-width bins spanning the pooled range.
    FixedCount(usize),
    /// Bins of the given width, starting at the padded minimum. The last
    /// bin may overshoot the padded maximum.
    FixedWidth(f64),
}

impl Default for BinningSpec {
    fn default() -> Self {
        BinningSpec::FixedCount(30)
    }
}

/// Which divergence to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceVariant {
    /// Symmetrised Kullback-Leibler: (KL(P,Q) + KL(Q,P)) / 2. Can be
    /// infinite when epsilon is zero and the supports differ.
    SymmetricKl,
    /// Jensen-Shannon with the mixture M = (P+Q)/2. Always finite.
    MixtureJsd,
}

impl Default for DivergenceVariant {
    fn default() -> Self {
        DivergenceVariant::SymmetricKl
    }
}

/// A normalized histogram: `masses[i]` is the share of the sample falling
/// between `edges[i]` and `edges[i+1]` (last bin right-closed).
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

/// Share of the pooled range added as padding on each side so that no
/// sample value sits exactly on an outer edge.
const EDGE_PAD: f64 = 0.001;

/// Build bin edges spanning both samples, padded by 0.1% of the pooled
/// range on each side.
pub fn make_common_edges(a: &[f64], b: &[f64], spec: BinningSpec) -> Result<Vec<f64>> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in a.iter().chain(b) {
        if !v.is_finite() {
            return Err(Error::DegenerateEdges(format!("non-finite sample value {v}")));
        }
        min = min.min(v);
        max = max.max(v);
    }
    if a.is_empty() && b.is_empty() {
        return Err(Error::DegenerateEdges("both samples are empty".into()));
    }
    let range = max - min;
    if range <= 0.0 {
        return Err(Error::DegenerateEdges(format!(
            "all {} pooled values equal {min}",
            a.len() + b.len()
        )));
    }
    let lo = min - EDGE_PAD * range;
    let hi = max + EDGE_PAD * range;

    let edges = match spec {
        BinningSpec::FixedCount(n) => {
            if n == 0 {
                return Err(Error::invalid("binning", "bin count must be at least 1"));
            }
            let width = (hi - lo) / n as f64;
            let mut edges: Vec<f64> = (0..=n).map(|i| lo + i as f64 * width).collect();
            edges[n] = hi;
            edges
        }
        BinningSpec::FixedWidth(w) => {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(
                    "binning",
                    format!("bin width must be positive, got {w}"),
                ));
            }
            let n = ((hi - lo) / w).ceil().max(1.0) as usize;
            (0..=n).map(|i| lo + i as f64 * w).collect()
        }
    };
    debug_assert!(edges.windows(2).all(|p| p[0] < p[1]));
    Ok(edges)
}

/// Histogram of `sample` over `edges`, normalized to total mass 1.
/// Bins are left-closed, right-open; the last bin is closed on both sides.
pub fn histogram(sample: &[f64], edges: &[f64]) -> Result<Distribution> {
    if edges.len() < 2 {
        return Err(Error::DegenerateEdges("need at least two edges".into()));
    }
    if sample.is_empty() {
        return Err(Error::TooFewSamples {
            population: "histogram sample".into(),
            n: 0,
            floor: 1,
        });
    }
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0u64; bins];
    for &v in sample {
        if !(v >= lo && v <= hi) {
            return Err(Error::SampleOutOfRange { value: v, lo, hi });
        }
        let idx = edges.partition_point(|&e| e <= v).saturating_sub(1);
        counts[idx.min(bins - 1)] += 1;
    }
    let n = sample.len() as f64;
    Ok(Distribution {
        edges: edges.to_vec(),
        masses: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

fn check_same_edges(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.edges.len() != q.edges.len() || p.edges != q.edges {
        return Err(Error::EdgeMismatch {
            left: p.masses.len(),
            right: q.masses.len(),
        });
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(
            "epsilon",
            format!("must be finite and non-negative, got {epsilon}"),
        ));
    }
    Ok(())
}

/// (m + eps) / (1 + eps * bins) per bin; keeps the total mass at 1.
fn smoothed(masses: &[f64], epsilon: f64) -> Vec<f64> {
    if epsilon == 0.0 {
        return masses.to_vec();
    }
    let denom = 1.0 + epsilon * masses.len() as f64;
    masses.iter().map(|&m| (m + epsilon) / denom).collect()
}

fn kl_sum(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi == 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc.max(0.0)
}

/// Kullback-Leibler divergence KL(P, Q) after smoothing both mass vectors.
/// With epsilon 0 and a bin where q = 0 < p the result is infinite.
pub fn kl_divergence(p: &Distribution, q: &Distribution, epsilon: f64) -> Result<f64> {
    check_same_edges(p, q)?;
    check_epsilon(epsilon)?;
    Ok(kl_sum(&smoothed(&p.masses, epsilon), &smoothed(&q.masses, epsilon)))
}

/// Divergence between two histograms over identical edges.
pub fn jsd(
    p: &Distribution,
    q: &Distribution,
    epsilon: f64,
    variant: DivergenceVariant,
) -> Result<f64> {
    check_same_edges(p, q)?;
    check_epsilon(epsilon)?;
    let ps = smoothed(&p.masses, epsilon);
    let qs = smoothed(&q.masses, epsilon);
    let d = match variant {
        DivergenceVariant::SymmetricKl => 0.5 * kl_sum(&ps, &qs) + 0.5 * kl_sum(&qs, &ps),
        DivergenceVariant::MixtureJsd => {
            let m: Vec<f64> = ps.iter().zip(&qs).map(|(a, b)| 0.5 * (a + b)).collect();
            0.5 * kl_sum(&ps, &m) + 0.5 * kl_sum(&qs, &m)
        }
    };
    Ok(d)
}

impl Distribution {
    /// Write `bin_left,bin_right,mass` rows for external plotting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let written = (|| -> csv::Result<()> {
            w.write_record(["bin_left", "bin_right", "mass"])?;
            for (i, &m) in self.masses.iter().enumerate() {
                w.write_record([
                    self.edges[i].to_string(),
                    self.edges[i + 1].to_string(),
                    m.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })();
        written.map_err(|e| Error::Config(format!("histogram export failed: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(masses: &[f64]) -> Distribution {
        let edges = (0..=masses.len()).map(|i| i as f64).collect();
        Distribution {
            edges,
            masses: masses.to_vec(),
        }
    }

    #[test]
    fn edges_pad_pooled_range() {
        let e = make_common_edges(&[1.0, 2.0], &[3.0, 4.0], BinningSpec::FixedCount(2)).unwrap();
        assert_eq!(e.len(), 3);
        assert!((e[0] - 0.997).abs() < 1e-12);
        assert!((e[1] - 2.5).abs() < 1e-12);
        assert!((e[2] - 4.003).abs() < 1e-12);
    }

    #[test]
    fn edges_reject_degenerate_input() {
        assert!(make_common_edges(&[2.0, 2.0], &[2.0], BinningSpec::FixedCount(4)).is_err());
        assert!(make_common_edges(&[], &[], BinningSpec::FixedCount(4)).is_err());
        assert!(make_common_edges(&[1.0], &[2.0], BinningSpec::FixedCount(0)).is_err());
        assert!(make_common_edges(&[1.0], &[2.0], BinningSpec::FixedWidth(0.0)).is_err());
    }

    #[test]
    fn fixed_width_covers_the_range() {
        let e = make_common_edges(&[0.0], &[10.0], BinningSpec::FixedWidth(3.0)).unwrap();
        assert!(e[0] <= 0.0 && *e.last().unwrap() >= 10.0);
        for w in e.windows(2) {
            assert!((w[1] - w[0] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_reference_point() {
        let d = histogram(&[1.0, 1.0, 3.0], &[0.0, 2.0, 4.0]).unwrap();
        assert!((d.masses[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.masses[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn histogram_closes_last_bin() {
        let d = histogram(&[0.0, 4.0], &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(d.masses, vec![0.5, 0.5]);
        assert!(matches!(
            histogram(&[5.0], &[0.0, 2.0, 4.0]),
            Err(Error::SampleOutOfRange { .. })
        ));
    }

    #[test]
    fn kl_reference_point() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        let d = kl_divergence(&p, &q, 0.0).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_infinite_without_smoothing() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[1.0, 0.0]);
        assert_eq!(kl_divergence(&p, &q, 0.0).unwrap(), f64::INFINITY);
        // Any positive epsilon makes it finite.
        assert!(kl_divergence(&p, &q, 1e-9).unwrap().is_finite());
        let d = jsd(&p, &q, 0.0, DivergenceVariant::SymmetricKl).unwrap();
        assert_eq!(d, f64::INFINITY);
    }

    #[test]
    fn mixture_reference_point() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        let d = jsd(&p, &q, 0.0, DivergenceVariant::MixtureJsd).unwrap();
        // 0.5*ln(4/3) + 0.25*ln(2/3) + 0.25*ln(2)
        let want = 0.5 * (4.0f64 / 3.0).ln() + 0.25 * (2.0f64 / 3.0).ln() + 0.25 * 2.0f64.ln();
        assert!((d - want).abs() < 1e-15);
        assert!((d - 0.2157).abs() < 1e-4);
    }

    #[test]
    fn mixture_always_finite() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.0, 1.0]);
        let d = jsd(&p, &q, 0.0, DivergenceVariant::MixtureJsd).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_edges_rejected() {
        let p = dist(&[1.0, 0.0]);
        let q = Distribution {
            edges: vec![0.0, 1.0, 3.0],
            masses: vec![0.5, 0.5],
        };
        assert!(matches!(
            jsd(&p, &q, 0.0, DivergenceVariant::MixtureJsd),
            Err(Error::EdgeMismatch { .. })
        ));
    }

    #[test]
    fn smoothing_keeps_total_mass() {
        let s = smoothed(&[0.2, 0.3, 0.5, 0.0], 1e-3);
        let total: f64 = s.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn histogram_mass_sums_to_one(
            sample in proptest::collection::vec(-1e6..1e6f64, 1..200),
            bins in 1usize..40,
        ) {
            prop_assume!(sample.iter().cloned().fold(f64::INFINITY, f64::min)
                < sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            let edges = make_common_edges(&sample, &[], BinningSpec::FixedCount(bins)).unwrap();
            let d = histogram(&sample, &edges).unwrap();
            let total: f64 = d.masses.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn jsd_symmetric_and_zero_on_self(
            pm in proptest::collection::vec(0.0..1.0f64, 8),
            qm in proptest::collection::vec(0.0..1.0f64, 8),
            eps in prop_oneof![Just(0.0), Just(1e-9), Just(1e-6)],
        ) {
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum();
                prop_assume!(s > 0.0);
                Ok(dist(&v.iter().map(|x| x / s).collect::<Vec<_>>()))
            };
            let p = norm(&pm)?;
            let q = norm(&qm)?;
            for variant in [DivergenceVariant::SymmetricKl, DivergenceVariant::MixtureJsd] {
                let ab = jsd(&p, &q, eps, variant).unwrap();
                let ba = jsd(&q, &p, eps, variant).unwrap();
                if ab.is_finite() {
                    prop_assert!((ab - ba).abs() <= 1e-12);
                    prop_assert!(ab >= 0.0);
                } else {
                    prop_assert_eq!(ab, ba);
                }
                prop_assert_eq!(jsd(&p, &p, eps, variant).unwrap(), 0.0);
            }
        }

        // Rescaling both samples by a power of two shifts the edges exactly
        // and leaves every divergence bit-identical.
        #[test]
        fn divergence_scale_invariant(
            a in proptest::collection::vec(0.1..1e4f64, 10..80),
            b in proptest::collection::vec(0.1..1e4f64, 10..80),
            k in prop_oneof![Just(0.25f64), Just(0.5), Just(2.0), Just(8.0)],
            bins in 2usize..40,
        ) {
            let spec = BinningSpec::FixedCount(bins);
            let edges = make_common_edges(&a, &b, spec).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x * k).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * k).collect();
            let sedges = make_common_edges(&sa, &sb, spec).unwrap();
            let (p, q) = (histogram(&a, &edges).unwrap(), histogram(&b, &edges).unwrap());
            let (sp, sq) = (histogram(&sa, &sedges).unwrap(), histogram(&sb, &sedges).unwrap());
            prop_assert_eq!(&p.masses, &sp.masses);
            prop_assert_eq!(&q.masses, &sq.masses);
            for variant in [DivergenceVariant::SymmetricKl, DivergenceVariant::MixtureJsd] {
                let d0 = jsd(&p, &q, 1e-9, variant).unwrap();
                let d1 = jsd(&sp, &sq, 1e-9, variant).unwrap();
                prop_assert_eq!(d0, d1);
            }
        }
    }
}
