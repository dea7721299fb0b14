use crate::math::{RngStream, Vec3};

/// Height below which the randomized ground-effect force is applied.
pub const GROUND_EFFECT_HEIGHT: f64 = 0.5;
/// Force magnitude at zero height.
pub const GROUND_EFFECT_MAX_FORCE: f64 = 0.3;

/// Near-ground aerodynamic force on the quadrotor: zero above
/// [`GROUND_EFFECT_HEIGHT`], otherwise `F_max (1 - z / h)` (saturating at
/// `F_max` for `z <= 0`) along a direction drawn uniformly from the upper
/// hemisphere.
pub fn ground_effect_force(z: f64, rng: &mut RngStream) -> Vec3 {
    if z >= GROUND_EFFECT_HEIGHT {
        return Vec3::zeros();
    }
    let deficit = 1.0 - z.max(0.0) / GROUND_EFFECT_HEIGHT;
    rng.upper_hemisphere() * (GROUND_EFFECT_MAX_FORCE * deficit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_above_threshold() {
        let mut rng = RngStream::new(1);
        assert_eq!(ground_effect_force(0.8, &mut rng), Vec3::zeros());
        assert_eq!(ground_effect_force(0.5, &mut rng), Vec3::zeros());
    }

    #[test]
    fn full_magnitude_at_ground() {
        let mut rng = RngStream::new(1);
        for _ in 0..100 {
            let f = ground_effect_force(0.0, &mut rng);
            assert!((f.norm() - GROUND_EFFECT_MAX_FORCE).abs() < 1e-12);
            assert!(f.z >= 0.0);
        }
    }

    #[test]
    fn magnitude_grows_as_height_drops() {
        let mut rng = RngStream::new(2);
        let mags: Vec<f64> = [0.45, 0.3, 0.1, 0.0]
            .iter()
            .map(|&z| ground_effect_force(z, &mut rng).norm())
            .collect();
        assert!(mags.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mean_direction_points_up() {
        let n = 100_000;
        let mut rng = RngStream::new(9);
        let mut sum = Vec3::zeros();
        let mut sq = Vec3::zeros();
        for _ in 0..n {
            let d = ground_effect_force(0.0, &mut rng) / GROUND_EFFECT_MAX_FORCE;
            sum += d;
            sq += d.component_mul(&d);
        }
        let mean = sum / n as f64;
        // per-axis standard error of the mean
        let se = (sq / n as f64 - mean.component_mul(&mean)).map(|v| (v / n as f64).sqrt());
        assert!(mean.z > 0.4, "mean z {}", mean.z); // exact value 1/2
        assert!(mean.x.abs() < 3.0 * se.x, "{mean:?} {se:?}");
        assert!(mean.y.abs() < 3.0 * se.y, "{mean:?} {se:?}");
    }
}
