//! Dormand-Prince 5(4) steps for a scalar ODE `y' = f(t, y)`.
//!
//! The right-hand side may decline to evaluate (returning `None`) near a
//! singular set; the step then reports failure and the caller shrinks the
//! step or changes formulation.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Outcome of one attempted step.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub y: f64,
    /// Difference between the embedded 5th and 4th order solutions.
    pub err: f64,
}

/// One Dormand-Prince step of size `h` (which may be negative).
pub fn dp45_step<F>(f: &mut F, t: f64, y: f64, h: f64) -> Option<Step>
where
    F: FnMut(f64, f64) -> Option<f64>,
{
    let mut k = [0.0; 7];
    for i in 0..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i) {
            yi += h * A[i][j] * kj;
        }
        k[i] = f(t + C[i] * h, yi)?;
    }
    let mut y5 = y;
    let mut y4 = y;
    for i in 0..7 {
        y5 += h * B5[i] * k[i];
        y4 += h * B4[i] * k[i];
    }
    (y5.is_finite()).then_some(Step { y: y5, err: y5 - y4 })
}

/// Error-control settings for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step magnitude, per formulation.
    pub h_max_m: f64,
    pub h_max_z: f64,
    /// Smallest step before the driver gives up on a formulation.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-300,
            h_max_m: 0.05,
            h_max_z: 0.01,
            h_min: 1e-14,
            max_steps: 200_000,
        }
    }
}

impl StepControl {
    /// Scaled error norm; `≤ 1` means accept.
    pub fn norm(&self, step: &Step, y0: f64) -> f64 {
        step.err.abs() / (self.atol + self.rtol * y0.abs().max(step.y.abs()))
    }

    /// Standard step-size update with safety factor and growth limits.
    pub fn next_h(&self, h: f64, norm: f64) -> f64 {
        let factor = if norm == 0.0 {
            5.0
        } else {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h * factor
    }
}
