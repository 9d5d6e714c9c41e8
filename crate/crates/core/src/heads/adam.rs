use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Bias-corrected Adam moments for a list of flat tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shapes: &[usize]) -> Self {
        AdamState {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::Shape(format!("tensor {k} has mismatched length")));
            }
        }
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = AdamState::new(&[1]);
        let mut p = [0.0];
        s.step(&mut [&mut p], &[&[1.0]], 0.001).unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-18);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn hand_computed_second_step() {
        let mut s = AdamState::new(&[1]);
        let mut p = [0.5];
        s.step(&mut [&mut p], &[&[2.0]], 0.01).unwrap();
        s.step(&mut [&mut p], &[&[-1.0]], 0.01).unwrap();
        let m1 = 0.1 * 2.0;
        let v1 = 0.001 * 4.0;
        let after1 = 0.5 - 0.01 * (m1 / 0.1) / ((v1 / 0.001f64).sqrt() + 1e-8);
        let m2 = 0.9 * m1 + 0.1 * -1.0;
        let v2 = 0.999 * v1 + 0.001 * 1.0;
        let after2 = after1 - 0.01 * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.999f64 * 0.999)).sqrt() + 1e-8);
        assert!((p[0] - after2).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut s = AdamState::new(&[3]);
        let mut p = [0.25, -1.0, 7.0];
        for _ in 0..50 {
            s.step(&mut [&mut p], &[&[0.0; 3]], 0.1).unwrap();
        }
        assert_eq!(p, [0.25, -1.0, 7.0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(&[2]);
        let mut p = [0.0; 3];
        assert!(matches!(s.step(&mut [&mut p], &[&[0.0; 3]], 0.1), Err(Error::Shape(_))));
        let mut q = [0.0; 2];
        assert!(matches!(s.step(&mut [&mut q], &[], 0.1), Err(Error::Shape(_))));
    }
}
