use crate::ebm::sign;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vector3};
use crate::network::CoordinateNetwork;

/// Value and parameter gradient of one objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Both terms of the objective and the gradient of their combination.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTerms {
    pub ebm: f64,
    pub eikonal: f64,
    pub total: f64,
    pub gradient: Vec<f64>,
}

/// `β (mean |f(pos)| - mean |f(neg)|)`. Negatives are constants: no gradient
/// flows through the sampler that produced them.
pub fn loss_ebm(net: &CoordinateNetwork, beta: f64, positives: &[Point3], negatives: &[Point3]) -> Result<Loss> {
    let t = total_loss(net, beta, 0.0, positives, negatives)?;
    Ok(Loss {
        value: t.ebm,
        gradient: t.gradient,
    })
}

/// `mean over U of (|∇ₓ f| - 1)²`.
pub fn loss_eikonal(net: &CoordinateNetwork, points: &[Point3]) -> Result<Loss> {
    if points.is_empty() {
        return Err(Error::invalid("Eikonal term needs at least one point"));
    }
    let u = points.len() as f64;
    let (gradient, _, grads) = net.weighted_parameter_gradient(points, |_, _, g| (0.0, eikonal_weight(g, 1.0 / u)));
    let value = grads.iter().map(|g| (g.norm() - 1.0).powi(2)).sum::<f64>() / u;
    Ok(Loss { value, gradient })
}

/// `L_EBM + γ L_E` with the Eikonal term over `positives ∪ negatives`,
/// computed in one tangent pass.
pub fn total_loss(
    net: &CoordinateNetwork,
    beta: f64,
    gamma: f64,
    positives: &[Point3],
    negatives: &[Point3],
) -> Result<LossTerms> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::invalid("both positive and negative sets must be non-empty"));
    }
    let (np, nn) = (positives.len(), negatives.len());
    let u = (np + nn) as f64;
    let points: Vec<Point3> = positives.iter().chain(negatives).copied().collect();
    let (gradient, values, grads) = net.weighted_parameter_gradient(&points, |i, f, g| {
        let c = if i < np {
            beta * sign(f) / np as f64
        } else {
            -beta * sign(f) / nn as f64
        };
        (c, eikonal_weight(g, gamma / u))
    });
    let pos = values[..np].iter().map(|f| f.abs()).sum::<f64>() / np as f64;
    let neg = values[np..].iter().map(|f| f.abs()).sum::<f64>() / nn as f64;
    let ebm = beta * (pos - neg);
    let eikonal = grads.iter().map(|g| (g.norm() - 1.0).powi(2)).sum::<f64>() / u;
    Ok(LossTerms {
        ebm,
        eikonal,
        total: ebm + gamma * eikonal,
        gradient,
    })
}

/// `∂/∂g [w (|g| - 1)²] = 2 w (|g| - 1) g / |g|`, zero at `g = 0`.
fn eikonal_weight(g: &Vector3, w: f64) -> Vector3 {
    let n = g.norm();
    if n > 0.0 && w != 0.0 {
        g * (2.0 * w * (n - 1.0) / n)
    } else {
        Vector3::zeros()
    }
}
