//! Coupling constants.

use std::f64::consts::PI;

/// Jump half-size at kappa = 4: `lambda = sqrt(pi/8)`.
pub fn lambda4() -> f64 {
    (PI / 8.0).sqrt()
}

/// General jump half-size `lambda_kappa = sqrt(pi/(2 kappa))`.
pub fn lambda_kappa(kappa: f64) -> f64 {
    (PI / (2.0 * kappa)).sqrt()
}

/// Winding coefficient `alpha_kappa = (4 - kappa) / (2 sqrt(2 pi kappa))`.
pub fn alpha_kappa(kappa: f64) -> f64 {
    (4.0 - kappa) / (2.0 * (2.0 * PI * kappa).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_values() {
        assert_relative_eq!(lambda4(), 0.6266570687, epsilon = 1e-9);
        assert_relative_eq!(lambda_kappa(4.0), lambda4(), epsilon = 1e-15);
        assert_relative_eq!(alpha_kappa(4.0), 0.0, epsilon = 1e-15);
        // alpha_8 = -1/(2 sqrt(pi))
        assert_relative_eq!(alpha_kappa(8.0), -1.0 / (2.0 * PI.sqrt()), epsilon = 1e-14);
        assert_relative_eq!(alpha_kappa(8.0), -0.28209479, epsilon = 1e-7);
        // 2 lambda = sqrt(pi/2)
        assert_relative_eq!(2.0 * lambda4(), 1.2533141373, epsilon = 1e-9);
    }
}
