//! Every tunable default in one place.
//!
//! | name | value | used by |
//! |---|---|---|
//! | `COLLOCATION_POINTS` | 400 | boundary solver |
//! | `VERIFY_POINTS` | 1600 | boundary solver inside `verify` |
//! | `CHARGE_INFLATION` | 0.5 | boundary solver |
//! | `OVERSAMPLING` | 2 | boundary solver |
//! | `SVD_CUT` | 1e-12 | boundary solver |
//! | `RESIDUAL_THRESHOLD` | 1e-6 | boundary solver |
//! | `MARGIN_FRACTION` | 0.02 | Robin function, as a fraction of the diameter |
//! | `GRID` | 9 | supremum search, points per axis |
//! | `MULTISTART` | 8 | supremum search |
//! | `MU_WINDOW` | [0.02, 0.2] | energy sweeps |
//! | `QUADRATURE_LEVEL` | 2 | volume quadrature |
//! | `D0_RMAX` | 500 | radial correction profile |

pub const COLLOCATION_POINTS: usize = 400;
pub const VERIFY_POINTS: usize = 1600;
pub const CHARGE_INFLATION: f64 = 0.5;
pub const OVERSAMPLING: f64 = 2.0;
pub const SVD_CUT: f64 = 1e-12;
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;
pub const MARGIN_FRACTION: f64 = 0.02;
pub const GRID: usize = 9;
pub const MULTISTART: usize = 8;
pub const MU_WINDOW: [f64; 2] = [0.02, 0.2];
pub const QUADRATURE_LEVEL: u32 = crate::domain::DEFAULT_QUADRATURE_LEVEL;
pub const D0_RMAX: f64 = 500.0;
