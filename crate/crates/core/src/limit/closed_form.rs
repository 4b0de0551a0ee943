use serde::{Deserialize, Serialize};

use super::LimitSpec;
use crate::error::{Error, Result};

/// Limit value on the ball of radius `R`,
/// `((Γ+Q(1-Γ))/(ΓR))^Γ ((Γ+Q(1-Γ))/(Q(1-Γ)R))^((1-Γ)Q)`,
/// evaluated through its logarithm.
pub fn lambda_inf_ball(s: &LimitSpec) -> Result<f64> {
    s.validate()?;
    let (g, r) = (s.gamma, s.r);
    let qv = s.v_power();
    let sum = g + qv;
    let ln = g * (sum.ln() - (g * r).ln()) + qv * (sum.ln() - (qv * r).ln());
    Ok(ln.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// Threshold met: the ball value.
    Ball,
    /// Thin rectangle: `1/((R-L)^Γ L^(1-Γ))`.
    Thin,
}

impl Branch {
    pub fn number(&self) -> u8 {
        match self {
            Branch::Ball => 1,
            Branch::Thin => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleValue {
    pub value: f64,
    pub branch: Branch,
}

/// Two-branch limit value on `(-R,R) x (-L,L)`: the ball value when
/// `ΓR/(Q(1-Γ)) <= L`, otherwise `1/((R-L)^Γ L^(1-Γ))`.
pub fn lambda_inf_rectangle(s: &LimitSpec) -> Result<RectangleValue> {
    s.validate()?;
    let l =
        s.l.ok_or_else(|| Error::InvalidLimit("rectangle value needs L".into()))?;
    let (g, r) = (s.gamma, s.r);
    if g * r / s.v_power() <= l {
        Ok(RectangleValue {
            value: lambda_inf_ball(s)?,
            branch: Branch::Ball,
        })
    } else {
        let ln = -(g * (r - l).ln() + (1.0 - g) * l.ln());
        Ok(RectangleValue {
            value: ln.exp(),
            branch: Branch::Thin,
        })
    }
}

/// Abscissa `a` with `Γ a = Q(1-Γ)(R-a)`, where the cone/plane profile on the
/// ball peaks.
pub fn optimal_touch_point(s: &LimitSpec) -> f64 {
    let qv = s.v_power();
    qv * s.r / (s.gamma + qv)
}

/// The constants of the explicit ball construction: `Θ`, the plane slope
/// `k2 = Θ^(Γ/Q)` and the cone slope `k1 = Θ k2^((Γ-1)Q/Γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallChain {
    pub theta: f64,
    pub k1: f64,
    pub k2: f64,
}

pub fn ball_chain(s: &LimitSpec) -> Result<BallChain> {
    s.validate()?;
    let (g, qq, r) = (s.gamma, s.big_q, s.r);
    let qv = s.v_power();
    let sum = g + qv;
    let ln_theta = (sum / (g * r)).ln() + qv / g * (sum / (qv * r)).ln();
    let ln_k2 = g / qq * ln_theta;
    let ln_k1 = ln_theta + (g - 1.0) * qq / g * ln_k2;
    Ok(BallChain {
        theta: ln_theta.exp(),
        k1: ln_k1.exp(),
        k2: ln_k2.exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_values() {
        let s = LimitSpec::ball(0.5, 1.0, 1.0).unwrap();
        assert!((lambda_inf_ball(&s).unwrap() - 2.0).abs() < 1e-14);
        let s = LimitSpec::ball(0.999, 1.0, 1.0).unwrap();
        assert!((lambda_inf_ball(&s).unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn ball_homogeneity_in_radius() {
        for (g, q) in [(0.3, 2.0), (0.7, 0.5), (0.5, 1.0)] {
            let one = lambda_inf_ball(&LimitSpec::ball(g, q, 1.0).unwrap()).unwrap();
            let two = lambda_inf_ball(&LimitSpec::ball(g, q, 2.0).unwrap()).unwrap();
            let factor = 2f64.powf(-g - (1.0 - g) * q);
            assert!((two - one * factor).abs() < 1e-13 * two);
        }
    }

    #[test]
    fn rectangle_branches() {
        let v = lambda_inf_rectangle(&LimitSpec::rectangle(0.5, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(v.branch, Branch::Ball);
        assert!((v.value - 2.0).abs() < 1e-14);
        let v = lambda_inf_rectangle(&LimitSpec::rectangle(0.5, 1.0, 2.0, 0.5).unwrap()).unwrap();
        assert_eq!(v.branch, Branch::Thin);
        assert!((v.value - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        let v = lambda_inf_rectangle(&LimitSpec::rectangle(1.0 / 3.0, 1.0, 1.0, 0.25).unwrap()).unwrap();
        assert_eq!(v.branch, Branch::Thin);
        assert!((v.value - 2.7735).abs() < 1e-4);
        assert!(lambda_inf_rectangle(&LimitSpec::ball(0.5, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn touch_point() {
        let s = LimitSpec::ball(0.5, 1.0, 1.0).unwrap();
        assert!((optimal_touch_point(&s) - 0.5).abs() < 1e-15);
        let s = LimitSpec::ball(1e-9, 1.0, 3.0).unwrap();
        assert!((optimal_touch_point(&s) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn chain_for_the_symmetric_ball() {
        let c = ball_chain(&LimitSpec::ball(0.5, 1.0, 1.0).unwrap()).unwrap();
        assert!((c.theta - 4.0).abs() < 1e-13);
        assert!((c.k1 - 2.0).abs() < 1e-13);
        assert!((c.k2 - 2.0).abs() < 1e-13);
    }
}
