//! Analytic reference paths parameterized by longitudinal position.
//!
//! Each path maps X to a lateral reference and its heading, with the
//! heading always consistent with the analytic slope: heading = atan(dY/dX).

use serde::{Deserialize, Serialize};

/// Shape of the double lane change: two opposing tanh transitions.
///
/// y(x) = o1/2 * (1 + tanh(z1)) - o2/2 * (1 + tanh(z2)) with
/// z_i = 2.4/w_i * (x - c_i) - 1.2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlcShape {
    /// Lateral offset of the first transition \[m\].
    #[serde(default = "DlcShape::default_first_offset")]
    pub first_offset: f64,
    /// Lateral offset of the return transition \[m\].
    #[serde(default = "DlcShape::default_second_offset")]
    pub second_offset: f64,
    /// Longitudinal extent of each transition \[m\].
    #[serde(default = "DlcShape::default_first_width")]
    pub first_width: f64,
    #[serde(default = "DlcShape::default_second_width")]
    pub second_width: f64,
    /// Center of each transition \[m\].
    #[serde(default = "DlcShape::default_first_center")]
    pub first_center: f64,
    #[serde(default = "DlcShape::default_second_center")]
    pub second_center: f64,
}

impl DlcShape {
    fn default_first_offset() -> f64 {
        4.05
    }
    fn default_second_offset() -> f64 {
        5.7
    }
    fn default_first_width() -> f64 {
        25.0
    }
    fn default_second_width() -> f64 {
        21.95
    }
    fn default_first_center() -> f64 {
        27.19
    }
    fn default_second_center() -> f64 {
        56.46
    }
}

impl Default for DlcShape {
    fn default() -> Self {
        DlcShape {
            first_offset: Self::default_first_offset(),
            second_offset: Self::default_second_offset(),
            first_width: Self::default_first_width(),
            second_width: Self::default_second_width(),
            first_center: Self::default_first_center(),
            second_center: Self::default_second_center(),
        }
    }
}

/// Reference geometry; `lookup` is defined for every finite X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferencePath {
    Straight,
    /// Circular arc through the origin, tangent to the X axis. Positive
    /// radius turns left. Beyond `max_heading` the path continues straight
    /// along the tangent so lookups stay bounded and continuous.
    ConstantTurn {
        radius: f64,
        #[serde(default = "default_max_heading")]
        max_heading: f64,
    },
    DoubleLaneChange {
        #[serde(default)]
        shape: DlcShape,
    },
}

fn default_max_heading() -> f64 {
    1.0
}

impl ReferencePath {
    /// Lateral reference and its analytic slope dY/dX at `x`.
    fn y_and_slope(&self, x: f64) -> (f64, f64) {
        match self {
            ReferencePath::Straight => (0.0, 0.0),
            ReferencePath::ConstantTurn {
                radius,
                max_heading,
            } => {
                let r = radius.abs();
                let sign = radius.signum();
                let x_cap = r * max_heading.sin();
                let xa = x.clamp(-x_cap, x_cap);
                let root = (r * r - xa * xa).sqrt();
                let y_arc = sign * (r - root);
                let slope_arc = sign * xa / root;
                if x.abs() <= x_cap {
                    (y_arc, slope_arc)
                } else {
                    // tangent extension beyond the heading cap
                    (y_arc + slope_arc * (x - xa), slope_arc)
                }
            }
            ReferencePath::DoubleLaneChange { shape } => {
                let z1 = 2.4 / shape.first_width * (x - shape.first_center) - 1.2;
                let z2 = 2.4 / shape.second_width * (x - shape.second_center) - 1.2;
                let y = shape.first_offset / 2.0 * (1.0 + z1.tanh())
                    - shape.second_offset / 2.0 * (1.0 + z2.tanh());
                let sech2 = |z: f64| {
                    let c = z.cosh();
                    1.0 / (c * c)
                };
                let slope = shape.first_offset / 2.0 * sech2(z1) * (2.4 / shape.first_width)
                    - shape.second_offset / 2.0 * sech2(z2) * (2.4 / shape.second_width);
                (y, slope)
            }
        }
    }

    /// (Y_ref, heading_ref) at longitudinal position `x`.
    pub fn lookup(&self, x: f64) -> (f64, f64) {
        let (y, slope) = self.y_and_slope(x);
        (y, slope.atan())
    }
}
