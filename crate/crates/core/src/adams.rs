//! Fixed-step two-step Adams predictor-corrector on flat state vectors.
//!
//! One PECE step:
//!
//! ```text
//! P: y* = y_n + h/2  (3 f_n - f_{n-1})                  (AB2)
//! E: f* = f(t_{n+1}, y*)
//! C: y_{n+1} = y_n + h/12 (5 f* + 8 f_n - f_{n-1})      (AM3)
//! E: f_{n+1} = f(t_{n+1}, y_{n+1})
//! ```
//!
//! The combination is third order (`min(q_p + 1, q_c)`). The first step
//! has no `f_{n-1}` and is taken with the explicit midpoint rule instead.

use crate::model::History;

/// Right-hand side of `y' = f(t, y)`.
pub trait VectorField {
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

/// Scratch buffers, reused across steps.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    stage: Vec<f64>,
    slope: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Workspace {
            stage: vec![0.0; dim],
            slope: vec![0.0; dim],
        }
    }

    fn fit(&mut self, dim: usize) {
        self.stage.resize(dim, 0.0);
        self.slope.resize(dim, 0.0);
    }
}

/// Explicit midpoint step from `t` to `t + h`; returns the two evaluations
/// the multistep scheme needs next (`f(t + h, y_1)` and `f(t, y_0)`).
///
/// `recycle` may hand in a stale history whose buffers get reused.
pub fn midpoint_step<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    h: f64,
    y: &mut [f64],
    ws: &mut Workspace,
    recycle: Option<History>,
) -> History {
    let dim = y.len();
    ws.fit(dim);
    let mut hist = recycle.unwrap_or_else(|| History {
        current: Vec::new(),
        previous: Vec::new(),
    });
    hist.current.resize(dim, 0.0);
    hist.previous.resize(dim, 0.0);

    field.eval(t, y, &mut hist.previous);
    for ((s, &yi), &fi) in ws.stage.iter_mut().zip(y.iter()).zip(&hist.previous) {
        *s = yi + 0.5 * h * fi;
    }
    field.eval(t + 0.5 * h, &ws.stage, &mut ws.slope);
    for (yi, &k) in y.iter_mut().zip(&ws.slope) {
        *yi += h * k;
    }
    field.eval(t + h, y, &mut hist.current);
    hist
}

/// One AB2/AM3 PECE step from `t` to `t + h`, updating `y` and `hist` in place.
pub fn pece_step<F: VectorField + ?Sized>(
    field: &F,
    t: f64,
    h: f64,
    y: &mut [f64],
    hist: &mut History,
    ws: &mut Workspace,
) {
    let dim = y.len();
    ws.fit(dim);
    debug_assert_eq!(hist.current.len(), dim);

    for i in 0..dim {
        ws.stage[i] = y[i] + 0.5 * h * (3.0 * hist.current[i] - hist.previous[i]);
    }
    let t_next = t + h;
    field.eval(t_next, &ws.stage, &mut ws.slope);
    let c = h / 12.0;
    for i in 0..dim {
        y[i] += c * (5.0 * ws.slope[i] + 8.0 * hist.current[i] - hist.previous[i]);
    }
    // f_n becomes f_{n-1}; the freed buffer receives f_{n+1}
    std::mem::swap(&mut hist.current, &mut hist.previous);
    field.eval(t_next, y, &mut hist.current);
}
