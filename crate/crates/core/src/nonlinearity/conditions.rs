//! Sampled checks of positivity (A), monotonicity (B), superlinear coupling
//! (C) and irreducibility (D), plus the fitted lower envelopes used for
//! upper bounds on the extremal parameter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{NonlinearMap, Site, Weight};
use crate::error::{Error, Result};
use crate::mesh::DiscreteDomain;
use crate::scalar::{lit, to_f64, Scalar};

/// The finite sample box standing in for the asymptotic statements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSpec {
    pub kappas: Vec<f64>,
    /// Largest `|t|` sampled for (C).
    pub radius: f64,
    /// Geometric magnitude levels in `[0.01, radius]`.
    pub levels: usize,
    /// Directions are the simplex lattice with this denominator.
    pub simplex_divisions: usize,
    /// Random ordered pairs for (B).
    pub pairs: usize,
    pub pair_radius: f64,
    pub irreducibility_samples: usize,
    /// At most this many grid sites are scanned for (C).
    pub max_sites: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            kappas: vec![1.0],
            radius: 40.0,
            levels: 32,
            simplex_divisions: 4,
            pairs: 1000,
            pair_radius: 10.0,
            irreducibility_samples: 64,
            max_sites: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub site: usize,
    pub coord: [f64; 2],
    pub t: Vec<f64>,
    /// The smaller point of a (B) pair.
    pub s: Option<Vec<f64>>,
    pub component: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub samples: usize,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaResult {
    pub kappa: f64,
    pub passed: bool,
    /// Largest `|t|` at which `F ≥ κρS_α` failed (0 if never).
    pub m_kappa: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub positivity: CheckResult,
    pub monotonicity: CheckResult,
    pub coupling: Vec<KappaResult>,
    pub irreducibility: CheckResult,
    pub sample_box: SampleSpec,
}

impl ConditionReport {
    pub fn coupling_passed(&self) -> bool {
        self.coupling.iter().all(|k| k.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.positivity.passed && self.monotonicity.passed && self.coupling_passed() && self.irreducibility.passed
    }
}

fn witness<T: Scalar>(site: Site<T>, t: &[T], s: Option<&[T]>, component: Option<usize>, detail: String) -> Witness {
    Witness {
        site: site.index,
        coord: [to_f64(site.coord[0]), to_f64(site.coord[1])],
        t: t.iter().map(|x| to_f64(*x)).collect(),
        s: s.map(|v| v.iter().map(|x| to_f64(*x)).collect()),
        component,
        detail,
    }
}

fn norm<T: Scalar>(t: &[T]) -> T {
    t.iter().map(|x| *x * *x).sum::<T>().sqrt()
}

/// Unit vectors `k/q` on the simplex lattice, rescaled to Euclidean norm 1.
fn simplex_directions<T: Scalar>(m: usize, q: usize) -> Vec<Vec<T>> {
    fn rec(m: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == m {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(m, left - k, prefix, out);
            prefix.pop();
        }
    }
    let q = q.max(1);
    let mut raw = Vec::new();
    rec(m, q, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|v| {
            let v: Vec<T> = v.into_iter().map(|k| lit(k as f64)).collect();
            let n = norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Sample points `s·d` over magnitudes and directions.
fn box_samples<T: Scalar>(m: usize, spec: &SampleSpec) -> Vec<Vec<T>> {
    let dirs = simplex_directions::<T>(m, spec.simplex_divisions);
    let levels = spec.levels.max(2);
    let lo = 0.01f64.ln();
    let hi = spec.radius.max(0.02).ln();
    let mut out = Vec::with_capacity(levels * dirs.len());
    for l in 0..levels {
        let s: T = lit((lo + (hi - lo) * l as f64 / (levels - 1) as f64).exp());
        for d in &dirs {
            out.push(d.iter().map(|x| *x * s).collect());
        }
    }
    out
}

fn sample_sites<T: Scalar>(domain: &DiscreteDomain<T>, max_sites: usize) -> Vec<Site<T>> {
    let n = domain.n_unknowns();
    let count = max_sites.clamp(1, n.max(1));
    if count >= n {
        return (0..n).map(|u| Site::of(domain, u)).collect();
    }
    let mut idx: Vec<usize> = (0..count).map(|k| k * (n - 1) / (count - 1).max(1)).collect();
    idx.dedup();
    idx.into_iter().map(|u| Site::of(domain, u)).collect()
}

/// `F` with overflow read as `+∞`.
fn eval_or_inf<T: Scalar>(map: &NonlinearMap<T>, site: Site<T>, t: &[T], out: &mut [T]) -> Result<()> {
    match map.eval_into(site, t, out) {
        Ok(()) => Ok(()),
        Err(Error::Saturation(_)) => {
            out.iter_mut().for_each(|v| *v = T::infinity());
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let m = adj.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let edge = if forward { adj[i][j] } else { adj[j][i] };
                if edge && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    m <= 1 || (reach(true) && reach(false))
}

/// Checks conditions (A)–(D) on the sample box; failures are report
/// contents, each with a witness.
pub fn verify_conditions<T: Scalar>(
    map: &NonlinearMap<T>,
    domain: &DiscreteDomain<T>,
    spec: &SampleSpec,
) -> Result<ConditionReport> {
    let m = map.m();
    map.check_sites(domain.n_unknowns())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut f = vec![T::zero(); m];
    let mut g = vec![T::zero(); m];
    let zero = vec![T::zero(); m];

    // (A) at every interior node.
    let mut positivity = CheckResult {
        passed: true,
        samples: domain.n_unknowns(),
        witness: None,
    };
    for u in 0..domain.n_unknowns() {
        let site = Site::of(domain, u);
        map.eval_into(site, &zero, &mut f)?;
        if let Some(i) = f.iter().position(|v| !(*v > T::zero())) {
            positivity.passed = false;
            positivity.witness = Some(witness(site, &zero, None, Some(i), format!("F_{}(x,0) = {}", i + 1, f[i])));
            break;
        }
    }

    // (B) on random ordered pairs 0 ≤ s ≤ t.
    let mut monotonicity = CheckResult {
        passed: true,
        samples: spec.pairs,
        witness: None,
    };
    let n = domain.n_unknowns();
    let mut s = vec![T::zero(); m];
    let mut t = vec![T::zero(); m];
    for _ in 0..spec.pairs {
        let site = Site::of(domain, rng.gen_range(0..n));
        for i in 0..m {
            let ti: f64 = rng.gen_range(0.0..spec.pair_radius);
            let frac: f64 = rng.gen_range(0.0..=1.0);
            t[i] = lit(ti);
            s[i] = lit(ti * frac);
        }
        eval_or_inf(map, site, &s, &mut f)?;
        eval_or_inf(map, site, &t, &mut g)?;
        let slack = lit::<T>(1e-12);
        if let Some(i) = (0..m).find(|&i| f[i] > g[i] + slack * g[i].abs()) {
            monotonicity.passed = false;
            monotonicity.witness = Some(witness(
                site,
                &t,
                Some(&s),
                Some(i),
                format!("F_{}(s) = {} > F_{}(t) = {}", i + 1, f[i], i + 1, g[i]),
            ));
            break;
        }
    }

    // (C) per κ: the largest failing |t| must stay inside the sample box.
    let shift = map.shift();
    let samples = box_samples::<T>(m, spec);
    let sites = sample_sites(domain, spec.max_sites);
    let shell = lit::<T>(0.5 * spec.radius);
    let mut coupling = Vec::with_capacity(spec.kappas.len());
    let mut sa = vec![T::zero(); m];
    for &kappa in &spec.kappas {
        let k = lit::<T>(kappa);
        let mut worst: Option<(T, Witness)> = None;
        let mut count = 0usize;
        for site in &sites {
            for t in &samples {
                count += 1;
                eval_or_inf(map, *site, t, &mut f)?;
                shift.apply_into(t, &mut sa);
                for i in 0..m {
                    let rhs = k * map.rho().at(i, site.index) * sa[i];
                    if f[i] < rhs {
                        let r = norm(t);
                        if worst.as_ref().is_none_or(|(w, _)| r > *w) {
                            let detail = format!("F_{} = {} < {}", i + 1, f[i], rhs);
                            worst = Some((r, witness(*site, t, None, Some(i), detail)));
                        }
                    }
                }
            }
        }
        let (m_kappa, passed, wit) = match worst {
            None => (0.0, true, None),
            Some((r, w)) => (to_f64(r), r < shell, Some(w)),
        };
        coupling.push(KappaResult {
            kappa,
            passed,
            m_kappa,
            samples: count,
            witness: if passed { None } else { wit },
        });
    }

    // (D) strong connectivity of the off-diagonal positive pattern.
    let mut irreducibility = CheckResult {
        passed: true,
        samples: spec.irreducibility_samples,
        witness: None,
    };
    let mut a = vec![T::zero(); m * m];
    for _ in 0..spec.irreducibility_samples {
        let site = Site::of(domain, rng.gen_range(0..n));
        for ti in t.iter_mut() {
            *ti = lit(rng.gen_range(0.01..spec.pair_radius));
        }
        match map.jacobian_into(site, &t, &mut a) {
            Ok(()) => {}
            Err(Error::Saturation(_)) => continue,
            Err(e) => return Err(e),
        }
        let adj: Vec<Vec<bool>> = (0..m)
            .map(|i| (0..m).map(|j| i != j && a[i * m + j] > T::zero()).collect())
            .collect();
        if !strongly_connected(&adj) {
            irreducibility.passed = false;
            irreducibility.witness = Some(witness(site, &t, None, None, "coupling graph of A is not strongly connected".into()));
            break;
        }
    }

    Ok(ConditionReport {
        positivity,
        monotonicity,
        coupling,
        irreducibility,
        sample_box: spec.clone(),
    })
}

/// Fitted constants with `C₀ F ≥ ρ₀ S_α` and `F ≥ κ ρ S_α − B ρ` on samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T> {
    pub kappa: T,
    /// `ρ₀ = min(ρ, F(·, 0))` on every unknown.
    pub rho0: Weight<T>,
    pub c0: T,
    pub b: T,
    pub samples: usize,
}

/// Fits the lower-envelope constants over the sample box. Fails when the
/// binding sample sits on the outer shell, i.e. when the fit would not
/// survive enlarging the box.
pub fn lower_envelope<T: Scalar>(
    map: &NonlinearMap<T>,
    domain: &DiscreteDomain<T>,
    kappa: T,
    spec: &SampleSpec,
) -> Result<Envelope<T>> {
    let m = map.m();
    let n = domain.n_unknowns();
    map.check_sites(n)?;
    let zero = vec![T::zero(); m];
    let mut f = vec![T::zero(); m];
    let mut table = vec![vec![T::zero(); n]; m];
    for u in 0..n {
        map.eval_into(Site::of(domain, u), &zero, &mut f)?;
        for i in 0..m {
            table[i][u] = map.rho().at(i, u).min(f[i]);
        }
    }
    let rho0 = Weight::Nodal(table);

    let shift = map.shift();
    let samples = box_samples::<T>(m, spec);
    let sites = sample_sites(domain, spec.max_sites);
    let shell = lit::<T>(0.5 * spec.radius);
    let mut sa = vec![T::zero(); m];
    let mut c0 = T::one();
    let mut c0_at = T::zero();
    let mut b = T::neg_infinity();
    let mut b_at = T::zero();
    let mut count = 0usize;
    for site in &sites {
        for t in &samples {
            count += 1;
            eval_or_inf(map, *site, t, &mut f)?;
            shift.apply_into(t, &mut sa);
            for i in 0..m {
                if !f[i].is_finite() {
                    continue;
                }
                let ratio = rho0.at(i, site.index) * sa[i] / f[i];
                if ratio > c0 {
                    c0 = ratio;
                    c0_at = norm(t);
                }
                let rho = map.rho().at(i, site.index);
                let gap = (kappa * rho * sa[i] - f[i]) / rho;
                if gap > b {
                    b = gap;
                    b_at = norm(t);
                }
            }
        }
    }
    if c0 > T::one() && c0_at >= shell {
        return Err(Error::EnvelopeFit(format!(
            "C0 = {c0} is attained at |t| = {c0_at} on the edge of the sample box"
        )));
    }
    let b = if b > T::zero() {
        if b_at >= shell {
            return Err(Error::EnvelopeFit(format!(
                "B = {b} is attained at |t| = {b_at} on the edge of the sample box"
            )));
        }
        b * (T::one() + lit(1e-6)) + lit(1e-12)
    } else {
        T::zero()
    };
    Ok(Envelope {
        kappa,
        rho0,
        c0,
        b,
        samples: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{make_example, MapKind};

    fn grid() -> DiscreteDomain<f64> {
        DiscreteDomain::interval(17).unwrap()
    }

    #[test]
    fn exp_shift_passes_everything() {
        let f = NonlinearMap::exp_shift(vec![1.0, 1.0]).unwrap();
        let report = verify_conditions(&f, &grid(), &SampleSpec::default()).unwrap();
        assert!(report.all_passed(), "{report:?}");
        assert!(report.coupling[0].m_kappa.is_finite());
    }

    #[test]
    fn decoupled_linear_map_fails_c_and_d() {
        let f = make_example::<f64>(MapKind::Custom {
            components: vec!["1 + t1".into(), "1 + t2".into()],
            jacobian: None,
            alpha: vec![1.0, 1.0],
            rho: Weight::ones(2),
            convex: true,
            potential: true,
        })
        .unwrap();
        let report = verify_conditions(&f, &grid(), &SampleSpec::default()).unwrap();
        assert!(report.positivity.passed);
        assert!(report.monotonicity.passed);
        assert!(!report.coupling[0].passed);
        assert!(report.coupling[0].witness.is_some());
        assert!(!report.irreducibility.passed);
        assert!(report.irreducibility.witness.is_some());
    }

    #[test]
    fn decreasing_map_fails_b_with_witness() {
        let f = make_example::<f64>(MapKind::Custom {
            components: vec!["exp(t1) * (2 + sin(3*t1))".into()],
            jacobian: None,
            alpha: vec![1.0],
            rho: Weight::ones(1),
            convex: false,
            potential: true,
        })
        .unwrap();
        let report = verify_conditions(&f, &grid(), &SampleSpec::default()).unwrap();
        assert!(!report.monotonicity.passed);
        let w = report.monotonicity.witness.unwrap();
        assert!(w.s.is_some());
    }

    #[test]
    fn gelfand_envelope() {
        let g = NonlinearMap::<f64>::gelfand();
        let env = lower_envelope(&g, &grid(), 1.0, &SampleSpec::default()).unwrap();
        assert_eq!(env.c0, 1.0);
        assert_eq!(env.b, 0.0);
        let env = lower_envelope(&g, &grid(), 0.0, &SampleSpec::default()).unwrap();
        assert_eq!(env.b, 0.0);
        let env = lower_envelope(&g, &grid(), 5.0, &SampleSpec::default()).unwrap();
        // max_t (5t − e^t) = 5 ln 5 − 5 at t = ln 5.
        let exact = 5.0 * 5.0f64.ln() - 5.0;
        assert!(env.b >= exact * (1.0 - 5e-3) && env.b <= exact * 1.01, "{}", env.b);
    }

    #[test]
    fn simplex_lattice_sizes() {
        assert_eq!(simplex_directions::<f64>(1, 4).len(), 1);
        assert_eq!(simplex_directions::<f64>(2, 4).len(), 5);
        assert_eq!(simplex_directions::<f64>(3, 4).len(), 15);
    }

    #[test]
    fn connectivity() {
        assert!(strongly_connected(&[vec![false, true], vec![true, false]]));
        assert!(!strongly_connected(&[vec![false, true], vec![false, false]]));
        assert!(strongly_connected(&[vec![false]]));
    }
}
