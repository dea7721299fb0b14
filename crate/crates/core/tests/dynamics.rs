use cablequad::dynamics::{
    impact_map, integrate_step, CableMode, CableModel, ExternalLoad, PayloadState, QuadrotorState, SystemParams,
    SystemState,
};
use cablequad::math::{e3, so3_exp, Rot3, RngStream, Vec3};
use proptest::prelude::*;

const DT: f64 = 0.002;

fn level(x: Vec3) -> QuadrotorState {
    QuadrotorState {
        x,
        v: Vec3::zeros(),
        rot: Rot3::identity(),
        omega: Vec3::zeros(),
    }
}

fn swinging(p: &SystemParams, theta: f64, stretch: f64) -> SystemState {
    let q = Vec3::new(theta.sin(), 0.0, -theta.cos());
    let quad = level(Vec3::new(0.0, 0.0, 3.0));
    SystemState {
        quad,
        payload: PayloadState {
            x: quad.x + (p.cable_length + stretch) * q,
            v: Vec3::zeros(),
        },
        mode: CableMode::Taut,
        q,
        omega_cable: Vec3::zeros(),
    }
}

/// Energy including the potential of a constant vertical thrust `f` on a
/// level quadrotor and the stored spring energy of a compliant cable.
fn energy(s: &SystemState, p: &SystemParams, f: f64, model: CableModel) -> f64 {
    let spring = match model {
        CableModel::Compliant => 0.5 * p.cable_stiffness * (s.cable_distance() - p.cable_length).max(0.0).powi(2),
        CableModel::Ideal => 0.0,
    };
    s.mechanical_energy(p) - f * s.quad.x.z + spring
}

fn conserved_over(model: CableModel, p: &SystemParams, seconds: f64) -> f64 {
    let f = (p.m_q + p.m_p) * p.g;
    let stretch = match model {
        CableModel::Compliant => p.m_p * p.g * 0.4f64.cos() / p.cable_stiffness,
        CableModel::Ideal => 0.0,
    };
    let mut s = swinging(p, 0.4, stretch);
    let e0 = energy(&s, p, f, model);
    let mut drift = 0.0f64;
    for _ in 0..(seconds / DT) as usize {
        s = integrate_step(&s, &[f / 4.0; 4], &ExternalLoad::default(), p, model, DT).unwrap();
        drift = drift.max((energy(&s, p, f, model) - e0).abs());
    }
    drift
}

#[test]
fn taut_swing_conserves_energy() {
    let drift = conserved_over(CableModel::Ideal, &SystemParams::nominal(), 10.0);
    assert!(drift < 1e-8, "energy drift {drift:e} J");
}

#[test]
fn undamped_compliant_swing_conserves_energy() {
    let p = SystemParams {
        cable_damping: 0.0,
        ..SystemParams::nominal()
    };
    let drift = conserved_over(CableModel::Compliant, &p, 10.0);
    assert!(drift < 1e-6, "energy drift {drift:e} J");
}

#[test]
fn compliant_static_hang_stretch() {
    let p = SystemParams::nominal();
    let mut s = SystemState::hanging(Vec3::new(0.0, 0.0, 3.0), &p, CableModel::Ideal);
    let f = (p.m_q + p.m_p) * p.g;
    for _ in 0..10_000 {
        s = integrate_step(&s, &[f / 4.0; 4], &ExternalLoad::default(), &p, CableModel::Compliant, DT).unwrap();
    }
    let expected = p.cable_length + p.m_p * p.g / p.cable_stiffness;
    assert!((s.cable_distance() - expected).abs() < 1e-9, "{} vs {expected}", s.cable_distance());
    assert!(s.payload.v.norm() < 1e-9 && s.quad.v.norm() < 1e-9);
}

#[test]
fn payload_hangs_below_hovering_quadrotor_without_drift() {
    let p = SystemParams::nominal();
    for model in [CableModel::Ideal, CableModel::Compliant] {
        let s0 = SystemState::hanging(Vec3::new(1.0, 2.0, 3.0), &p, model);
        let f = (p.m_q + p.m_p) * p.g;
        let mut s = s0;
        for _ in 0..1000 {
            s = integrate_step(&s, &[f / 4.0; 4], &ExternalLoad::default(), &p, model, DT).unwrap();
        }
        assert!((s.payload.x - s0.payload.x).norm() < 1e-9, "{model:?}");
    }
}

#[test]
fn external_force_accelerates_the_rigid_body() {
    let p = SystemParams::nominal().with_payload(0.0, 0.0);
    let mut s = SystemState::rigid(level(Vec3::new(0.0, 0.0, 3.0)));
    let m = p.rigid_mass();
    let load = ExternalLoad {
        force: Vec3::new(0.5, 0.0, 0.0),
        moment: Vec3::zeros(),
    };
    for _ in 0..500 {
        s = integrate_step(&s, &[m * p.g / 4.0; 4], &load, &p, CableModel::Ideal, DT).unwrap();
    }
    let expect = 0.5 / m * 1.0;
    assert!((s.quad.v.x - expect).abs() < 1e-12 && s.quad.v.z.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rotation_stays_on_so3(seed in any::<u64>()) {
        let p = SystemParams::nominal().with_payload(0.0, 0.0);
        let mut rng = RngStream::new(seed);
        let mut s = SystemState::rigid(QuadrotorState {
            x: Vec3::new(0.0, 0.0, 5.0),
            v: Vec3::zeros(),
            rot: so3_exp(&rng.uniform_box(3.0)),
            omega: rng.uniform_box(5.0),
        });
        let rotors: [f64; 4] = std::array::from_fn(|_| rng.uniform(0.0, p.rotor_max()));
        for _ in 0..500 {
            s = integrate_step(&s, &rotors, &ExternalLoad::default(), &p, CableModel::Ideal, DT).unwrap();
        }
        prop_assert!(s.quad.rot.orthonormality_error() < 1e-10);
    }

    #[test]
    fn impact_map_invariants(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let p = SystemParams::nominal().with_payload(rng.uniform(0.05, 0.5), rng.uniform(0.3, 2.0));
        let u = rng.unit_vector();
        let quad = QuadrotorState {
            x: rng.uniform_box(2.0),
            v: rng.uniform_box(3.0),
            rot: Rot3::identity(),
            omega: Vec3::zeros(),
        };
        let pre = SystemState {
            quad,
            payload: PayloadState { x: quad.x + u * p.cable_length * rng.uniform(1.0, 1.02), v: rng.uniform_box(4.0) },
            mode: CableMode::Slack,
            q: u,
            omega_cable: Vec3::zeros(),
        };
        let post = impact_map(&pre, &p);
        let momentum = |s: &SystemState| s.quad.v * p.m_q + s.payload.v * p.m_p;
        let com = |s: &SystemState| (s.quad.x * p.m_q + s.payload.x * p.m_p) / (p.m_q + p.m_p);
        prop_assert!((momentum(&post) - momentum(&pre)).norm() < 1e-12);
        prop_assert!((com(&post) - com(&pre)).norm() < 1e-12);
        prop_assert!((post.cable_distance() - p.cable_length).abs() < 1e-12);
        prop_assert!(post.q.dot(&(post.payload.v - post.quad.v)).abs() < 1e-12);
        prop_assert!(post.kinetic_energy(&p) <= pre.kinetic_energy(&p) + 1e-12);
        prop_assert_eq!(post.mode, CableMode::Taut);
        // applying the map again changes nothing
        let again = impact_map(&post, &p);
        prop_assert!((again.payload.v - post.payload.v).norm() < 1e-12);
        prop_assert!((again.quad.x - post.quad.x).norm() < 1e-12);
    }

    #[test]
    fn slack_payload_follows_gravity(seed in any::<u64>()) {
        let mut rng = RngStream::new(seed);
        let p = SystemParams::nominal();
        let quad = level(Vec3::new(0.0, 0.0, 3.0));
        let x0 = quad.x + Vec3::new(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), -rng.uniform(0.2, 0.5));
        let mut s = SystemState::with_payload_at(quad, x0, &p);
        for _ in 0..50 {
            s = integrate_step(&s, &[p.m_q * p.g / 4.0; 4], &ExternalLoad::default(), &p, CableModel::Ideal, DT).unwrap();
        }
        let t = 50.0 * DT;
        prop_assert_eq!(s.mode, CableMode::Slack);
        prop_assert!((s.payload.x - (x0 - 0.5 * p.g * t * t * e3())).norm() < 1e-12);
        prop_assert!((s.quad.x - quad.x).norm() < 1e-12);
    }
}
