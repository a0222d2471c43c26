//! Constant-velocity Kalman filter over
//! `[cx, cy, cz, yaw, length, width, height, vx, vy, vz]`.
//!
//! Velocities are in meters per frame; the observation is the first seven
//! components.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Box3D};

pub type StateVector = SVector<f64, 10>;
pub type StateCovariance = SMatrix<f64, 10, 10>;
type Observation = SVector<f64, 7>;
type ObservationMatrix = SMatrix<f64, 7, 10>;

const YAW: usize = 3;
const MIN_DIM: f64 = 1e-3;

/// Process, measurement and initial variances of the filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionNoise {
    pub init_pos_var: f64,
    pub init_yaw_var: f64,
    pub init_dim_var: f64,
    pub init_vel_var: f64,
    pub q_pos: f64,
    pub q_yaw: f64,
    pub q_dim: f64,
    pub q_vel: f64,
    pub r_pos: f64,
    pub r_yaw: f64,
    pub r_dim: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            init_pos_var: 0.1,
            init_yaw_var: 0.01,
            init_dim_var: 0.01,
            init_vel_var: 100.0,
            q_pos: 0.01,
            q_yaw: 0.01,
            q_dim: 1e-4,
            q_vel: 0.01,
            r_pos: 0.09,
            r_yaw: 0.01,
            r_dim: 0.01,
        }
    }
}

/// Filter mean and covariance at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl TrackState {
    pub fn position(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.mean[7], self.mean[8]]
    }

    pub fn to_box(&self) -> Box3D {
        let m = &self.mean;
        Box3D::new(
            [m[0], m[1], m[2]],
            [m[4].max(MIN_DIM), m[5].max(MIN_DIM), m[6].max(MIN_DIM)],
            m[YAW],
        )
        .expect("filter state stays finite")
    }
}

fn observe(b: &Box3D) -> Observation {
    Observation::from([b.cx, b.cy, b.cz, b.yaw, b.length, b.width, b.height])
}

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    transition: StateCovariance,
    process: StateCovariance,
    observation: ObservationMatrix,
    measurement: SMatrix<f64, 7, 7>,
    initial: StateCovariance,
}

impl KalmanFilter {
    pub fn new(noise: &MotionNoise) -> Self {
        let mut transition = StateCovariance::identity();
        for i in 0..3 {
            transition[(i, 7 + i)] = 1.0;
        }
        let diag = |pos: f64, yaw: f64, dim: f64, vel: f64| {
            StateCovariance::from_diagonal(&StateVector::from([pos, pos, pos, yaw, dim, dim, dim, vel, vel, vel]))
        };
        let mut observation = ObservationMatrix::zeros();
        for i in 0..7 {
            observation[(i, i)] = 1.0;
        }
        let r = noise;
        Self {
            transition,
            process: diag(r.q_pos, r.q_yaw, r.q_dim, r.q_vel),
            observation,
            measurement: SMatrix::<f64, 7, 7>::from_diagonal(&Observation::from([
                r.r_pos, r.r_pos, r.r_pos, r.r_yaw, r.r_dim, r.r_dim, r.r_dim,
            ])),
            initial: diag(r.init_pos_var, r.init_yaw_var, r.init_dim_var, r.init_vel_var),
        }
    }

    /// Replaces the process noise `Q`.
    pub fn with_process_noise(mut self, q: StateCovariance) -> Self {
        self.process = q;
        self
    }

    /// Fresh state at a detection with zero velocity.
    pub fn initiate(&self, detection: &Box3D) -> TrackState {
        let z = observe(detection);
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<7>(0).copy_from(&z);
        TrackState {
            mean,
            covariance: self.initial,
        }
    }

    /// Advances one frame: position += velocity, `P = F P Fᵀ + Q`.
    pub fn predict(&self, state: &TrackState) -> TrackState {
        let mut mean = self.transition * state.mean;
        mean[YAW] = normalize_angle(mean[YAW]);
        let covariance = self.transition * state.covariance * self.transition.transpose() + self.process;
        TrackState {
            mean,
            covariance: symmetrize(covariance),
        }
    }

    /// Corrects with an observed box. The yaw innovation is wrapped and the
    /// covariance uses the Joseph form.
    pub fn update(&self, state: &TrackState, detection: &Box3D) -> TrackState {
        let h = &self.observation;
        let mut innovation = observe(detection) - h * state.mean;
        innovation[YAW] = normalize_angle(innovation[YAW]);
        let s = h * state.covariance * h.transpose() + self.measurement;
        let s_inv = s
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| s.try_inverse())
            .expect("innovation covariance is positive definite");
        let gain = state.covariance * h.transpose() * s_inv;
        let mut mean = state.mean + gain * innovation;
        mean[YAW] = normalize_angle(mean[YAW]);
        let i_kh = StateCovariance::identity() - gain * h;
        let covariance = i_kh * state.covariance * i_kh.transpose() + gain * self.measurement * gain.transpose();
        TrackState {
            mean,
            covariance: symmetrize(covariance),
        }
    }
}

fn symmetrize(m: StateCovariance) -> StateCovariance {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kf() -> KalmanFilter {
        KalmanFilter::new(&MotionNoise::default())
    }

    fn state_with_velocity(v: [f64; 3]) -> TrackState {
        let b = Box3D::new([2.0, -1.0, 0.5], [4.0, 1.8, 1.5], 0.2).unwrap();
        let mut s = kf().initiate(&b);
        s.mean[7] = v[0];
        s.mean[8] = v[1];
        s.mean[9] = v[2];
        s
    }

    #[test]
    fn zero_velocity_keeps_position() {
        let s = state_with_velocity([0.0; 3]);
        let p = kf().predict(&s);
        assert_eq!(p.mean.fixed_rows::<3>(0), s.mean.fixed_rows::<3>(0));
    }

    #[test]
    fn unit_velocity_advances_one_meter() {
        let f = kf();
        let mut s = state_with_velocity([1.0, 0.0, 0.0]);
        let x0 = s.mean[0];
        for step in 1..=3 {
            s = f.predict(&s);
            assert_eq!(s.mean[0], x0 + step as f64);
            assert_eq!(s.mean[1], -1.0);
        }
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let f = kf();
        let s = f.predict(&state_with_velocity([0.5, 0.25, 0.0]));
        let u = f.update(&s, &s.to_box());
        for i in 0..10 {
            assert!((u.mean[i] - s.mean[i]).abs() < 1e-12, "component {i}");
        }
    }

    #[test]
    fn yaw_innovation_wraps() {
        let f = kf();
        let mut s = state_with_velocity([0.0; 3]);
        s.mean[YAW] = 3.1;
        let b = Box3D::new([2.0, -1.0, 0.5], [4.0, 1.8, 1.5], -3.1).unwrap();
        let u = f.update(&s, &b);
        // innovation is 2π - 6.2 ≈ +0.083; the posterior moves past π and wraps
        let moved = normalize_angle(u.mean[YAW] - 3.1);
        assert!(moved > 0.0 && moved < 0.0832, "{moved}");
    }

    #[test]
    fn update_keeps_covariance_symmetric_psd() {
        let f = kf();
        let mut s = state_with_velocity([1.0, 0.5, 0.0]);
        for i in 0..20 {
            s = f.predict(&s);
            let b = Box3D::new([2.0 + i as f64, -1.0 + 0.5 * i as f64, 0.5], [4.0, 1.8, 1.5], 0.2).unwrap();
            s = f.update(&s, &b);
            let p = &s.covariance;
            assert!((p - p.transpose()).abs().max() < 1e-9);
            let eig = p.symmetric_eigenvalues();
            assert!(eig.min() >= -1e-9);
        }
    }
}
