use super::{DenseNet, Gradients, Layer, LayerGrads};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// SGD with classical momentum:
///
/// ```text
/// v <- momentum * v - learning_rate * g
/// theta <- theta + v
/// ```
///
/// `momentum = 0` reduces to plain SGD. Velocity buffers are created lazily
/// on the first step and then stay bound to that network's architecture.
#[derive(Debug, Clone)]
pub struct SgdMomentum {
    pub learning_rate: f64,
    pub momentum: f64,
    velocities: Option<Vec<Velocity>>,
}

#[derive(Debug, Clone)]
enum Velocity {
    Dense { weight: Matrix, bias: Vec<f64> },
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
    None,
}

impl SgdMomentum {
    pub fn new(learning_rate: f64, momentum: f64) -> Self {
        SgdMomentum { learning_rate, momentum, velocities: None }
    }

    /// Apply one update. Gradients must come from the same network.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers().len() {
            return Err(Error::State("gradients do not match this network".into()));
        }
        if self.velocities.is_none() {
            self.velocities = Some(
                net.layers()
                    .iter()
                    .map(|l| match l {
                        Layer::Dense { weight, bias, .. } => Velocity::Dense {
                            weight: Matrix::zeros(weight.rows(), weight.cols()),
                            bias: vec![0.0; bias.len()],
                        },
                        Layer::BatchNorm { gamma, beta, .. } => Velocity::BatchNorm {
                            gamma: vec![0.0; gamma.len()],
                            beta: vec![0.0; beta.len()],
                        },
                        _ => Velocity::None,
                    })
                    .collect(),
            );
        }

        let lr = self.learning_rate;
        let mu = self.momentum;
        let velocities = self.velocities.as_mut().unwrap();
        if velocities.len() != net.layers().len() {
            return Err(Error::State("optimizer is bound to a different network".into()));
        }

        for ((layer, vel), grad) in
            net.layers_mut().iter_mut().zip(velocities).zip(&grads.layers)
        {
            match (layer, vel, grad) {
                (
                    Layer::Dense { weight, bias, .. },
                    Velocity::Dense { weight: vw, bias: vb },
                    LayerGrads::Dense { weight: gw, bias: gb },
                ) => {
                    if vw.shape() != gw.shape() || weight.shape() != gw.shape() {
                        return Err(Error::State(
                            "optimizer is bound to a different network".into(),
                        ));
                    }
                    for (v, &g) in vw.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                        *v = mu * *v - lr * g;
                    }
                    for (w, &v) in weight.as_mut_slice().iter_mut().zip(vw.as_slice()) {
                        *w += v;
                    }
                    for (v, &g) in vb.iter_mut().zip(gb) {
                        *v = mu * *v - lr * g;
                    }
                    for (b, &v) in bias.iter_mut().zip(&*vb) {
                        *b += v;
                    }
                }
                (
                    Layer::BatchNorm { gamma, beta, .. },
                    Velocity::BatchNorm { gamma: vg, beta: vb },
                    LayerGrads::BatchNorm { gamma: gg, beta: gb },
                ) => {
                    for (v, &g) in vg.iter_mut().zip(gg) {
                        *v = mu * *v - lr * g;
                    }
                    for (p, &v) in gamma.iter_mut().zip(&*vg) {
                        *p += v;
                    }
                    for (v, &g) in vb.iter_mut().zip(gb) {
                        *v = mu * *v - lr * g;
                    }
                    for (p, &v) in beta.iter_mut().zip(&*vb) {
                        *p += v;
                    }
                }
                (_, Velocity::None, LayerGrads::None) => {}
                _ => return Err(Error::State("gradients do not match this network".into())),
            }
        }
        Ok(())
    }
}
