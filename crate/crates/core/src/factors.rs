//! Residuals of the joint positioning-and-control objective and their
//! analytic Jacobians.
//!
//! Rotation residuals follow one convention everywhere:
//! `Log(R_targetᵀ · R_estimate)`, which vanishes when the estimate reaches
//! the target and is differentiated with right perturbations.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3, Vector4};

use crate::dynamics::{allocate, QuadParams, QuadState, RotorSpeeds, Vector12, Wrench};
use crate::error::{JpcmError, Result};
use crate::fgo::{rotor_tangent_scale, Factor, ManifoldValue, NoiseModel, VariableKey};
use crate::so3::{dexp_right, dexp_right_inv, skew, Rotation};

pub type Vector6 = SVector<f64, 6>;
pub type Vector9 = SVector<f64, 9>;

/// A point of the reference trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub position: Vector3<f64>,
    pub rotation: Rotation,
    pub velocity: Vector3<f64>,
}

impl RefPoint {
    /// Reference as a full state with zero body rate.
    pub fn to_state(&self) -> QuadState {
        QuadState {
            position: self.position,
            rotation: self.rotation,
            velocity: self.velocity,
            angular_velocity: Vector3::zeros(),
        }
    }
}

/// Rigid transform stored as a rotation and a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn of_state(x: &QuadState) -> Self {
        Self {
            rotation: x.rotation,
            translation: x.position,
        }
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.translation + self.rotation.rotate(&other.translation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            rotation: r_inv,
            translation: -r_inv.rotate(&self.translation),
        }
    }

    /// `self⁻¹ · other`.
    pub fn between(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }
}

/// Relative pose of body `j` expressed in the frame of body `i`, as produced
/// by scan registration.
#[derive(Debug, Clone, PartialEq)]
pub struct RelPoseMeas {
    pub i: usize,
    pub j: usize,
    pub relative: Pose,
    /// 6x6 covariance ordered (rotation, translation).
    pub covariance: DMatrix<f64>,
    /// Body-to-sensor transform; the measurement is re-expressed in body
    /// frames by conjugation.
    pub extrinsic: Pose,
}

impl RelPoseMeas {
    pub fn new(i: usize, j: usize, relative: Pose, covariance: DMatrix<f64>) -> Result<Self> {
        if i >= j {
            return Err(JpcmError::Config(format!("relative pose needs i < j, got ({i}, {j})")));
        }
        if covariance.shape() != (6, 6) {
            return Err(JpcmError::Dimension("relative pose covariance must be 6x6".into()));
        }
        Ok(Self {
            i,
            j,
            relative,
            covariance,
            extrinsic: Pose::identity(),
        })
    }

    /// The measurement as a body-to-body relative pose.
    pub fn body_relative(&self) -> Pose {
        let sensor_to_body = self.extrinsic.inverse();
        sensor_to_body.compose(&self.relative).compose(&self.extrinsic)
    }
}

fn block3(v: &Vector3<f64>, out: &mut [f64]) {
    out.copy_from_slice(v.as_slice());
}

// ---------------------------------------------------------------- positioning

/// `(p − p_m, Log(R_mᵀ R), v − v_m, ω − ω_m)`.
pub fn positioning_error(x: &QuadState, measured: &QuadState) -> Vector12 {
    x.local(measured)
}

pub fn positioning_jacobian(x: &QuadState, measured: &QuadState) -> SMatrix<f64, 12, 12> {
    let e_theta = x.rotation.local(&measured.rotation);
    let mut j = SMatrix::<f64, 12, 12>::identity();
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&dexp_right_inv(&e_theta));
    j
}

/// Absolute state measurement; also used as a tight prior to pin a state.
#[derive(Debug, Clone)]
pub struct PositioningFactor {
    keys: [VariableKey; 1],
    measured: QuadState,
    noise: NoiseModel,
    name: &'static str,
}

impl PositioningFactor {
    pub const NAME: &'static str = "positioning";
    pub const PRIOR: &'static str = "prior";

    pub fn new(key: VariableKey, measured: QuadState, noise: NoiseModel) -> Self {
        Self {
            keys: [key],
            measured,
            noise,
            name: Self::NAME,
        }
    }

    /// Same residual, reported under the `prior` name.
    pub fn prior(key: VariableKey, value: QuadState, noise: NoiseModel) -> Self {
        Self {
            name: Self::PRIOR,
            ..Self::new(key, value, noise)
        }
    }
}

impl Factor for PositioningFactor {
    fn name(&self) -> &'static str {
        self.name
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, values: &[&ManifoldValue]) -> DVector<f64> {
        let e = positioning_error(values[0].as_state(), &self.measured);
        DVector::from_column_slice(e.as_slice())
    }
    fn jacobians(&self, values: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        let j = positioning_jacobian(values[0].as_state(), &self.measured);
        Some(vec![DMatrix::from_column_slice(12, 12, j.as_slice())])
    }
}

// ---------------------------------------------------------------- lidar

/// `(Log(R_Eᵀ...), t_E)` of `E = T_meas⁻¹ · T_i⁻¹ T_j`, zero when the
/// measurement explains the two poses.
pub fn lidar_relative_error(xi: &QuadState, xj: &QuadState, meas: &Pose) -> Vector6 {
    let predicted = Pose::of_state(xi).between(&Pose::of_state(xj));
    let e = meas.between(&predicted);
    let mut out = Vector6::zeros();
    block3(&e.rotation.log(), &mut out.as_mut_slice()[0..3]);
    block3(&e.translation, &mut out.as_mut_slice()[3..6]);
    out
}

/// Jacobians with respect to the full 12-dim states `x_i` and `x_j`.
pub fn lidar_relative_jacobians(
    xi: &QuadState,
    xj: &QuadState,
    meas: &Pose,
) -> (SMatrix<f64, 6, 12>, SMatrix<f64, 6, 12>) {
    let ri = xi.rotation.matrix();
    let rj = xj.rotation.matrix();
    let rm_t = meas.rotation.matrix().transpose();
    let e_rot = Rotation::from_matrix_unchecked(rm_t * ri.transpose() * rj);
    let jr_inv = dexp_right_inv(&e_rot.log());
    let d = ri.transpose() * (xj.position - xi.position);

    let mut ji = SMatrix::<f64, 6, 12>::zeros();
    let mut jj = SMatrix::<f64, 6, 12>::zeros();
    ji.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-jr_inv * rj.transpose() * ri));
    jj.fixed_view_mut::<3, 3>(0, 3).copy_from(&jr_inv);
    ji.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-rm_t * ri.transpose()));
    ji.fixed_view_mut::<3, 3>(3, 3).copy_from(&(rm_t * skew(&d)));
    jj.fixed_view_mut::<3, 3>(3, 0).copy_from(&(rm_t * ri.transpose()));
    (ji, jj)
}

#[derive(Debug, Clone)]
pub struct LidarFactor {
    keys: [VariableKey; 2],
    relative: Pose,
    noise: NoiseModel,
}

impl LidarFactor {
    pub const NAME: &'static str = "lidar";

    pub fn new(meas: &RelPoseMeas) -> Result<Self> {
        Ok(Self {
            keys: [VariableKey::state(meas.i), VariableKey::state(meas.j)],
            relative: meas.body_relative(),
            noise: NoiseModel::from_covariance(&meas.covariance)?,
        })
    }
}

impl Factor for LidarFactor {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, values: &[&ManifoldValue]) -> DVector<f64> {
        let e = lidar_relative_error(values[0].as_state(), values[1].as_state(), &self.relative);
        DVector::from_column_slice(e.as_slice())
    }
    fn jacobians(&self, values: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        let (ji, jj) =
            lidar_relative_jacobians(values[0].as_state(), values[1].as_state(), &self.relative);
        Some(vec![
            DMatrix::from_column_slice(6, 12, ji.as_slice()),
            DMatrix::from_column_slice(6, 12, jj.as_slice()),
        ])
    }
}

// ---------------------------------------------------------------- dynamics

/// Residual rows are ordered `(e_p, e_v, e_θ, e_ω)`.
pub fn dynamics_error(
    xi: &QuadState,
    wi: &Wrench,
    xn: &QuadState,
    dt: f64,
    params: &QuadParams,
) -> Vector12 {
    let inertia = Vector3::from(params.inertia);
    let e3 = Vector3::z();
    let e_p = xn.position - xi.velocity * dt - xi.position;
    let accel = -e3 * params.gravity + xi.rotation.rotate(&(e3 * wi.thrust)) / params.mass;
    let e_v = xn.velocity - xi.velocity - accel * dt;
    let predicted = xi.rotation.retract(&(xi.angular_velocity * dt));
    let e_theta = predicted.local(&xn.rotation);
    let w = xi.angular_velocity;
    let alpha = (wi.moment - w.cross(&inertia.component_mul(&w))).component_div(&inertia);
    let e_w = xn.angular_velocity - w - alpha * dt;

    let mut out = Vector12::zeros();
    let s = out.as_mut_slice();
    block3(&e_p, &mut s[0..3]);
    block3(&e_v, &mut s[3..6]);
    block3(&e_theta, &mut s[6..9]);
    block3(&e_w, &mut s[9..12]);
    out
}

/// Gyroscopic coupling `∂(I⁻¹ (ω × I ω))/∂ω` for diagonal inertia, in the
/// `a, b, c` form.
pub fn gyroscopic_jacobian(omega: &Vector3<f64>, inertia: &[f64; 3]) -> Matrix3<f64> {
    let [i1, i2, i3] = *inertia;
    let a = (i3 - i2) / i1;
    let b = (i1 - i3) / i2;
    let c = (i2 - i1) / i3;
    let (w1, w2, w3) = (omega.x, omega.y, omega.z);
    Matrix3::new(
        0.0,
        a * w3,
        a * w2,
        b * w3,
        0.0,
        b * w1,
        c * w2,
        c * w1,
        0.0,
    )
}

/// Jacobian blocks with respect to `(x_i, w_i, x_{i+1})`.
pub fn dynamics_jacobians(
    xi: &QuadState,
    wi: &Wrench,
    xn: &QuadState,
    dt: f64,
    params: &QuadParams,
) -> (SMatrix<f64, 12, 12>, SMatrix<f64, 12, 4>, SMatrix<f64, 12, 12>) {
    let id = Matrix3::identity();
    let e3 = Vector3::z();
    let ri = xi.rotation.matrix();
    let phi = xi.angular_velocity * dt;
    let step = Rotation::exp(&phi);
    let err_rot = xn.rotation.inverse().compose(&xi.rotation).compose(&step);
    let jr_inv = dexp_right_inv(&err_rot.log());

    let mut jx = SMatrix::<f64, 12, 12>::zeros();
    let mut jw = SMatrix::<f64, 12, 4>::zeros();
    let mut jn = SMatrix::<f64, 12, 12>::zeros();

    // e_p
    jx.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-id));
    jx.fixed_view_mut::<3, 3>(0, 6).copy_from(&(-id * dt));
    jn.fixed_view_mut::<3, 3>(0, 0).copy_from(&id);
    // e_v
    jx.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(ri * skew(&e3) * (wi.thrust * dt / params.mass)));
    jx.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-id));
    jw.fixed_view_mut::<3, 1>(3, 0).copy_from(&(-(ri * e3) * (dt / params.mass)));
    jn.fixed_view_mut::<3, 3>(3, 6).copy_from(&id);
    // e_θ
    jx.fixed_view_mut::<3, 3>(6, 3)
        .copy_from(&(jr_inv * step.matrix().transpose()));
    jx.fixed_view_mut::<3, 3>(6, 9).copy_from(&(jr_inv * dexp_right(&phi) * dt));
    jn.fixed_view_mut::<3, 3>(6, 3)
        .copy_from(&(-jr_inv * err_rot.matrix().transpose()));
    // e_ω
    jx.fixed_view_mut::<3, 3>(9, 9)
        .copy_from(&(-id + gyroscopic_jacobian(&xi.angular_velocity, &params.inertia) * dt));
    let inv_inertia = Matrix3::from_diagonal(&Vector3::from(params.inertia).map(|v| 1.0 / v));
    jw.fixed_view_mut::<3, 3>(9, 1).copy_from(&(-inv_inertia * dt));
    jn.fixed_view_mut::<3, 3>(9, 9).copy_from(&id);

    (jx, jw, jn)
}

/// Explicit-Euler model consistency between consecutive states.
#[derive(Debug, Clone)]
pub struct DynamicsFactor {
    keys: [VariableKey; 3],
    dt: f64,
    params: QuadParams,
    noise: NoiseModel,
}

impl DynamicsFactor {
    pub const NAME: &'static str = "dynamics";

    pub fn new(
        x_i: VariableKey,
        w_i: VariableKey,
        x_next: VariableKey,
        dt: f64,
        params: QuadParams,
        noise: NoiseModel,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(JpcmError::Config(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            keys: [x_i, w_i, x_next],
            dt,
            params,
            noise,
        })
    }
}

impl Factor for DynamicsFactor {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, v: &[&ManifoldValue]) -> DVector<f64> {
        let e = dynamics_error(v[0].as_state(), v[1].as_wrench(), v[2].as_state(), self.dt, &self.params);
        DVector::from_column_slice(e.as_slice())
    }
    fn jacobians(&self, v: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        let (jx, jw, jn) =
            dynamics_jacobians(v[0].as_state(), v[1].as_wrench(), v[2].as_state(), self.dt, &self.params);
        Some(vec![
            DMatrix::from_column_slice(12, 12, jx.as_slice()),
            DMatrix::from_column_slice(12, 4, jw.as_slice()),
            DMatrix::from_column_slice(12, 12, jn.as_slice()),
        ])
    }
}

// ---------------------------------------------------------------- reference

/// `(p − p_r, Log(R_rᵀ R), v − v_r)`.
pub fn reference_error(x: &QuadState, r: &RefPoint) -> Vector9 {
    let mut out = Vector9::zeros();
    let s = out.as_mut_slice();
    block3(&(x.position - r.position), &mut s[0..3]);
    block3(&x.rotation.local(&r.rotation), &mut s[3..6]);
    block3(&(x.velocity - r.velocity), &mut s[6..9]);
    out
}

pub fn reference_jacobian(x: &QuadState, r: &RefPoint) -> SMatrix<f64, 9, 12> {
    let mut j = SMatrix::<f64, 9, 12>::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    j.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&dexp_right_inv(&x.rotation.local(&r.rotation)));
    j.fixed_view_mut::<3, 3>(6, 6).copy_from(&Matrix3::identity());
    j
}

#[derive(Debug, Clone)]
pub struct ReferenceFactor {
    keys: [VariableKey; 1],
    reference: RefPoint,
    noise: NoiseModel,
}

impl ReferenceFactor {
    pub const NAME: &'static str = "reference";

    pub fn new(key: VariableKey, reference: RefPoint, noise: NoiseModel) -> Self {
        Self {
            keys: [key],
            reference,
            noise,
        }
    }
}

impl Factor for ReferenceFactor {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, v: &[&ManifoldValue]) -> DVector<f64> {
        DVector::from_column_slice(reference_error(v[0].as_state(), &self.reference).as_slice())
    }
    fn jacobians(&self, v: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        let j = reference_jacobian(v[0].as_state(), &self.reference);
        Some(vec![DMatrix::from_column_slice(9, 12, j.as_slice())])
    }
}

// ---------------------------------------------------------------- allocation

/// `τ − g(u)`.
pub fn caf_error(w: &Wrench, u: &RotorSpeeds, params: &QuadParams) -> Vector4<f64> {
    w.as_vector() - allocate(u, params).as_vector()
}

/// `∂/∂u = −T_e · diag(2u)`; the wrench block is the identity.
pub fn caf_rotor_jacobian(u: &RotorSpeeds, params: &QuadParams) -> SMatrix<f64, 4, 4> {
    -params.allocation_matrix() * SMatrix::<f64, 4, 4>::from_diagonal(&(u.0 * 2.0))
}

#[derive(Debug, Clone)]
pub struct CafFactor {
    keys: [VariableKey; 2],
    params: QuadParams,
    noise: NoiseModel,
}

impl CafFactor {
    pub const NAME: &'static str = "caf";

    pub fn new(w: VariableKey, u: VariableKey, params: QuadParams, noise: NoiseModel) -> Self {
        Self {
            keys: [w, u],
            params,
            noise,
        }
    }
}

impl Factor for CafFactor {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, v: &[&ManifoldValue]) -> DVector<f64> {
        DVector::from_column_slice(caf_error(v[0].as_wrench(), v[1].as_rotor(), &self.params).as_slice())
    }
    fn jacobians(&self, v: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        let u = v[1].as_rotor();
        let ju = caf_rotor_jacobian(u, &self.params) * SMatrix::<f64, 4, 4>::from_diagonal(&rotor_tangent_scale(u));
        Some(vec![
            DMatrix::identity(4, 4),
            DMatrix::from_column_slice(4, 4, ju.as_slice()),
        ])
    }
}

// ---------------------------------------------------------------- limits

/// Rotor bounds of the hinge penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorLimits {
    pub min: f64,
    pub max: f64,
    pub threshold: f64,
}

impl RotorLimits {
    pub fn from_params(params: &QuadParams) -> Self {
        Self {
            min: params.rotor_min,
            max: params.rotor_max,
            threshold: params.rotor_threshold,
        }
    }

    fn lower(&self) -> f64 {
        self.min + self.threshold
    }

    fn upper(&self) -> f64 {
        self.max - self.threshold
    }

    fn hinge(&self, u: f64) -> (f64, f64) {
        if u < self.lower() {
            (self.lower() - u, -1.0)
        } else if u >= self.upper() {
            (u - self.upper(), 1.0)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Per-rotor hinge: positive inside the threshold band next to each bound.
pub fn clf_error(u: &RotorSpeeds, limits: &RotorLimits) -> Vector4<f64> {
    u.0.map(|x| limits.hinge(x).0)
}

pub fn clf_jacobian(u: &RotorSpeeds, limits: &RotorLimits) -> SMatrix<f64, 4, 4> {
    SMatrix::<f64, 4, 4>::from_diagonal(&u.0.map(|x| limits.hinge(x).1))
}

#[derive(Debug, Clone)]
pub struct ClfFactor {
    keys: [VariableKey; 1],
    limits: RotorLimits,
    noise: NoiseModel,
}

impl ClfFactor {
    pub const NAME: &'static str = "clf";

    pub fn new(u: VariableKey, limits: RotorLimits, noise: NoiseModel) -> Result<Self> {
        if limits.lower() >= limits.upper() {
            return Err(JpcmError::Config("rotor limit band is empty".into()));
        }
        Ok(Self {
            keys: [u],
            limits,
            noise,
        })
    }
}

impl Factor for ClfFactor {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, v: &[&ManifoldValue]) -> DVector<f64> {
        DVector::from_column_slice(clf_error(v[0].as_rotor(), &self.limits).as_slice())
    }
    fn jacobians(&self, v: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        let u = v[0].as_rotor();
        let j = clf_jacobian(u, &self.limits) * SMatrix::<f64, 4, 4>::from_diagonal(&rotor_tangent_scale(u));
        Some(vec![DMatrix::from_column_slice(4, 4, j.as_slice())])
    }
}

// ---------------------------------------------------------------- input rate

/// `w_t − w_{t+1}` on `(T_z, M_x, M_y, M_z)`.
pub fn input_rate_error(w_t: &Wrench, w_next: &Wrench) -> Vector4<f64> {
    w_t.as_vector() - w_next.as_vector()
}

#[derive(Debug, Clone)]
pub struct InputRateFactor {
    keys: [VariableKey; 2],
    noise: NoiseModel,
}

impl InputRateFactor {
    pub const NAME: &'static str = "input_rate";

    pub fn new(w_t: VariableKey, w_next: VariableKey, noise: NoiseModel) -> Self {
        Self {
            keys: [w_t, w_next],
            noise,
        }
    }
}

impl Factor for InputRateFactor {
    fn name(&self) -> &'static str {
        Self::NAME
    }
    fn keys(&self) -> &[VariableKey] {
        &self.keys
    }
    fn noise(&self) -> &NoiseModel {
        &self.noise
    }
    fn error(&self, v: &[&ManifoldValue]) -> DVector<f64> {
        DVector::from_column_slice(input_rate_error(v[0].as_wrench(), v[1].as_wrench()).as_slice())
    }
    fn jacobians(&self, _v: &[&ManifoldValue]) -> Option<Vec<DMatrix<f64>>> {
        Some(vec![DMatrix::identity(4, 4), -DMatrix::identity(4, 4)])
    }
}
