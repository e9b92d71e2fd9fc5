use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::numerics::ParamSet;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Check at most this many coordinates per parameter (chosen by seed);
    /// `None` checks every coordinate.
    pub max_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_per_param: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub numeric_at_worst: f64,
    pub analytic_at_worst: f64,
    pub checked: usize,
}

/// Relative error with a 1e-8 floor on the denominator.
pub fn relative_error(numeric: f64, analytic: f64) -> f64 {
    let denom = numeric.abs().max(analytic.abs()).max(1e-8);
    (numeric - analytic).abs() / denom
}

/// Compares `analytic` gradients against central finite differences of `f`
/// and returns the maximum relative error over the checked coordinates.
pub fn grad_check<F>(f: F, params: &ParamSet, analytic: &ParamSet, step: f64) -> f64
where
    F: FnMut(&ParamSet) -> f64,
{
    grad_check_report(
        f,
        params,
        analytic,
        GradCheckOptions {
            step,
            ..Default::default()
        },
    )
    .max_rel_error
}

pub fn grad_check_report<F>(
    mut f: F,
    params: &ParamSet,
    analytic: &ParamSet,
    opts: GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&ParamSet) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        numeric_at_worst: 0.0,
        analytic_at_worst: 0.0,
        checked: 0,
    };
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in names {
        let len = params.get(&name).map_or(0, |m| m.len());
        let Some(ana) = analytic.get(&name) else {
            // parameters absent from the analytic set are treated as zero-gradient
            check_coords(&mut f, &mut probe, &name, all_or_sample(len, opts, &mut rng), None, opts.step, &mut report);
            continue;
        };
        assert_eq!(ana.len(), len, "analytic gradient shape for {name}");
        let coords = all_or_sample(len, opts, &mut rng);
        check_coords(&mut f, &mut probe, &name, coords, Some(ana.as_slice()), opts.step, &mut report);
    }
    report
}

fn all_or_sample(len: usize, opts: GradCheckOptions, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match opts.max_per_param {
        Some(cap) if cap < len => {
            let mut idx = sample(rng, len, cap).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

fn check_coords<F>(
    f: &mut F,
    probe: &mut ParamSet,
    name: &str,
    coords: Vec<usize>,
    analytic: Option<&[f64]>,
    h: f64,
    report: &mut GradCheckReport,
) where
    F: FnMut(&ParamSet) -> f64,
{
    for i in coords {
        let orig = probe.get(name).unwrap().as_slice()[i];
        probe.get_mut(name).unwrap().as_mut_slice()[i] = orig + h;
        let plus = f(probe);
        probe.get_mut(name).unwrap().as_mut_slice()[i] = orig - h;
        let minus = f(probe);
        probe.get_mut(name).unwrap().as_mut_slice()[i] = orig;

        let numeric = (plus - minus) / (2.0 * h);
        let ana = analytic.map_or(0.0, |a| a[i]);
        let err = relative_error(numeric, ana);
        report.checked += 1;
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((name.to_string(), i));
            report.numeric_at_worst = numeric;
            report.analytic_at_worst = ana;
        }
    }
}
