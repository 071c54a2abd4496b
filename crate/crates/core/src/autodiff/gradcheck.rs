use serde::Serialize;

use super::{AutodiffError, Graph, ParamStore, Var};

/// Settings for [`finite_diff_check_with`].
#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub h: f64,
    /// Pass threshold on the maximum relative error.
    pub tol: f64,
    /// Relative errors are taken against `max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
    /// Check at most this many evenly spaced entries per parameter.
    pub max_entries: Option<usize>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, tol: 1e-4, floor: 1e-4, max_entries: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }
}

/// Compares analytic parameter gradients of a scalar graph with central differences.
pub fn finite_diff_check<F, E>(store: &ParamStore, h: f64, tol: f64, build: F) -> Result<GradCheckReport, E>
where
    F: for<'s> Fn(&mut Graph<'s>, &'s ParamStore) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    finite_diff_check_with(store, &GradCheckOptions { h, tol, ..Default::default() }, build)
}

pub fn finite_diff_check_with<F, E>(store: &ParamStore, opts: &GradCheckOptions, build: F) -> Result<GradCheckReport, E>
where
    F: for<'s> Fn(&mut Graph<'s>, &'s ParamStore) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    let analytic = {
        let mut g = Graph::new();
        let out = build(&mut g, store)?;
        g.backward(out)?
    };
    let eval = |s: &ParamStore| -> Result<f64, E> {
        let mut g = Graph::new();
        let out = build(&mut g, s)?;
        Ok(g.value(out).item())
    };

    let mut work = store.clone();
    let mut report = GradCheckReport { params: Vec::new(), max_rel_error: 0.0, tol: opts.tol };
    for (id, p) in store.iter() {
        let n = p.value().len();
        let picks: Vec<usize> = match opts.max_entries {
            Some(k) if k < n => (0..k).map(|i| i * n / k).collect(),
            _ => (0..n).collect(),
        };
        let grad = analytic.param(id);
        let mut check = ParamCheck { name: p.name().to_string(), checked: picks.len(), max_rel_error: 0.0, max_abs_error: 0.0 };
        for i in picks {
            let orig = p.value().data()[i];
            work.get_mut(id).value_mut().data_mut()[i] = orig + opts.h;
            let up = eval(&work)?;
            work.get_mut(id).value_mut().data_mut()[i] = orig - opts.h;
            let down = eval(&work)?;
            work.get_mut(id).value_mut().data_mut()[i] = orig;

            let numeric = (up - down) / (2.0 * opts.h);
            let exact = grad.map_or(0.0, |g| g.data()[i]);
            let abs = (numeric - exact).abs();
            let rel = abs / exact.abs().max(numeric.abs()).max(opts.floor);
            check.max_abs_error = check.max_abs_error.max(abs);
            check.max_rel_error = check.max_rel_error.max(rel);
        }
        report.max_rel_error = report.max_rel_error.max(check.max_rel_error);
        report.params.push(check);
    }
    Ok(report)
}
