//! Embedded Runge–Kutta pairs with adaptive step size.
//!
//! Two pairs are provided: Dormand–Prince 5(4) for the smooth spectral
//! systems and Bogacki–Shampine 3(2) for the finite-volume scheme. Both are
//! FSAL, use a PI step controller (Hairer, Nørsett & Wanner II.4), and hit
//! requested output times exactly by clipping the step — no interpolation,
//! which keeps reruns bit-reproducible.

use crate::error::{Error, Result};

/// Which embedded pair to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkMethod {
    DormandPrince45,
    BogackiShampine32,
}

struct Tableau {
    /// Stage count, including the FSAL stage.
    stages: usize,
    c: &'static [f64],
    a: &'static [&'static [f64]],
    /// High-order solution weights.
    b: &'static [f64],
    /// Error weights b − b̂.
    e: &'static [f64],
    /// Lower order of the pair, used in the controller exponents.
    order: usize,
}

const DOPRI5: Tableau = Tableau {
    stages: 7,
    c: &[0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[0.2],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
        ],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ],
    b: &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
    e: &[
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ],
    order: 4,
};

const BS32: Tableau = Tableau {
    stages: 4,
    c: &[0.0, 0.5, 0.75, 1.0],
    a: &[
        &[],
        &[0.5],
        &[0.0, 0.75],
        &[2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0],
    ],
    b: &[2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
    e: &[
        2.0 / 9.0 - 7.0 / 24.0,
        1.0 / 3.0 - 0.25,
        4.0 / 9.0 - 1.0 / 3.0,
        -0.125,
    ],
    order: 2,
};

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
/// Steps smaller than this fraction of the span abort the integration.
const UNDERFLOW_FRACTION: f64 = 1e-14;

/// Weighted RMS error norm against atol + rtol·|y|.
fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], atol: f64, rtol: f64) -> f64 {
    let n = err.len().max(1);
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(&e, (&a, &b))| {
            let scale = atol + rtol * a.abs().max(b.abs());
            let r = e / scale;
            r * r
        })
        .sum();
    (sum / n as f64).sqrt()
}

/// Hairer's starting-step heuristic (II.4, "starting step size").
fn initial_step(
    rhs: &mut impl FnMut(f64, &[f64], &mut [f64]),
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    direction: f64,
    order: usize,
    atol: f64,
    rtol: f64,
) -> f64 {
    let scale_norm = |v: &[f64]| -> f64 {
        let n = v.len().max(1);
        let sum: f64 = v
            .iter()
            .zip(y0)
            .map(|(&vi, &yi)| {
                let s = atol + rtol * yi.abs();
                (vi / s) * (vi / s)
            })
            .sum();
        (sum / n as f64).sqrt()
    };
    let d0 = scale_norm(y0);
    let d1 = scale_norm(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 *= direction;
    // One explicit Euler step to probe the second derivative.
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(&y, &f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    let df: Vec<f64> = f1.iter().zip(f0).map(|(&a, &b)| a - b).collect();
    let d2 = scale_norm(&df) / h0.abs();
    let max_d = d1.max(d2);
    let h1 = if max_d <= 1e-15 {
        (h0.abs() * 1e-3).max(1e-6)
    } else {
        (0.01 / max_d).powf(1.0 / (order as f64 + 1.0))
    };
    direction * h1.min(100.0 * h0.abs())
}

/// Integrate `y' = rhs(t, y)` over `tspan`, invoking `observer` at `t0`, at
/// every multiple of `save_every`, and at the final time. Steps are clipped
/// so save times are hit exactly.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
    y0: &[f64],
    tspan: (f64, f64),
    rtol: f64,
    atol: f64,
    method: RkMethod,
    save_every: f64,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<()> {
    let (t0, t_end) = tspan;
    if !(t_end > t0) {
        return Err(Error::invalid(format!(
            "nondegenerate forward time span required, got ({t0}, {t_end})"
        )));
    }
    if !(rtol > 0.0) || !(atol > 0.0) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    if !(save_every > 0.0) {
        return Err(Error::invalid("save cadence must be positive"));
    }
    let tab = match method {
        RkMethod::DormandPrince45 => &DOPRI5,
        RkMethod::BogackiShampine32 => &BS32,
    };
    let span = t_end - t0;
    let n = y0.len();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; tab.stages];
    rhs(t, &y, &mut k[0]);
    observer(t, &y);

    let mut h = initial_step(&mut rhs, t, &y, &k[0], 1.0, tab.order, atol, rtol)
        .abs()
        .min(span);
    // PI controller memory.
    let mut err_old: f64 = 1.0;
    let alpha = 0.7 / (tab.order as f64 + 1.0);
    let beta = 0.4 / (tab.order as f64 + 1.0);

    let mut save_index: u64 = 1;
    let mut next_save = (t0 + save_every).min(t_end);
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];

    while t < t_end {
        let stop = next_save.min(t_end);
        let clipped = h >= stop - t;
        let h_try = if clipped { stop - t } else { h };
        if h_try < UNDERFLOW_FRACTION * span {
            return Err(Error::Integration(format!(
                "step size underflow at t = {t} (h = {h_try:.3e})"
            )));
        }

        // Stages 2..s; k[0] is fresh from FSAL or the initial evaluation.
        for s in 1..tab.stages {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, &a) in tab.a[s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                y_stage[i] = y[i] + h_try * acc;
            }
            rhs(t + tab.c[s] * h_try, &y_stage, &mut k[s]);
        }
        for i in 0..n {
            let mut sol = 0.0;
            let mut e = 0.0;
            for s in 0..tab.stages {
                sol += tab.b[s] * k[s][i];
                e += tab.e[s] * k[s][i];
            }
            y_new[i] = y[i] + h_try * sol;
            err[i] = h_try * e;
        }

        let err_norm = error_norm(&err, &y, &y_new, atol, rtol);
        if err_norm.is_finite() && err_norm <= 1.0 {
            // Accept.
            t = if clipped { stop } else { t + h_try };
            std::mem::swap(&mut y, &mut y_new);
            // FSAL: the last stage was evaluated at (t_new, y_new).
            let last = tab.stages - 1;
            k.swap(0, last);

            if clipped && stop == next_save {
                observer(t, &y);
                save_index += 1;
                next_save = t0 + save_index as f64 * save_every;
                if next_save > t_end {
                    next_save = t_end;
                }
            } else if t >= t_end {
                observer(t, &y);
            }

            // A clipped step is artificially short; growing the working step
            // from it would be fine, but shrinking it to the clip length
            // strangles the integrator, so only the controller output of
            // free-running steps feeds back into `h`.
            if !clipped {
                let scale = SAFETY
                    * err_norm.max(1e-10).powf(-alpha)
                    * err_old.max(1e-10).powf(beta);
                h = h_try * scale.clamp(MIN_SCALE, MAX_SCALE);
            }
            err_old = err_norm.max(1e-10);
        } else {
            // Reject: shrink and retry; non-finite errors shrink hard.
            let scale = if err_norm.is_finite() {
                (SAFETY * err_norm.powf(-1.0 / (tab.order as f64 + 1.0))).clamp(MIN_SCALE, 0.9)
            } else {
                0.1
            };
            h = h_try * scale;
            if h < UNDERFLOW_FRACTION * span {
                return Err(Error::Integration(format!(
                    "step size underflow after rejection at t = {t}"
                )));
            }
            // k[0] still holds f(t, y); FSAL remains valid for the retry.
        }
    }
    Ok(())
}
