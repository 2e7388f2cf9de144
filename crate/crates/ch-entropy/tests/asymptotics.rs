use ch_entropy::ambient::AmbientVector;
use ch_entropy::asymptotics::{
    bergman_reparam, boundary_mean_curvature_residual, boundary_profile, boundary_taylor, compactification,
    decay_rate_fit, default_rays, default_s_list, regularity_classification, DecayFit, ProfileField, ReparamDirection,
};
use ch_entropy::geometry::Submanifold;
use ch_entropy::zoo::{make, ExampleSpec};

const TOL: f64 = 1e-3;

fn compact(name: &str) -> Submanifold {
    let ex = make(&ExampleSpec::new(name)).unwrap();
    compactification(ex.family().unwrap(), 0.3).unwrap()
}

fn fits(name: &str, field: ProfileField) -> Vec<DecayFit> {
    let sigma = compact(name);
    default_rays(&sigma, 2)
        .iter()
        .map(|ray| decay_rate_fit(&boundary_profile(&sigma, ray, &default_s_list()).unwrap(), field).unwrap())
        .collect()
}

#[test]
fn displaced_slice_decays_at_rate_two() {
    for fit in fits("displaced_slice", ProfileField::TTop) {
        let slope = fit.slope().expect("a nonzero profile");
        assert!((1.9..=2.1).contains(&slope), "{fit:?}");
    }
    for fit in fits("displaced_slice", ProfileField::XPerp) {
        assert!(fit.slope().unwrap() >= 0.9, "{fit:?}");
    }
}

#[test]
fn displaced_geodesic_is_quasi_normal_with_fast_reeb_decay() {
    // for a curve the Reeb component decays one order faster than the bound
    for fit in fits("geodesic", ProfileField::TTop) {
        assert!(fit.slope().map_or(true, |s| s >= 1.9), "{fit:?}");
    }
    for fit in fits("geodesic", ProfileField::XPerp) {
        assert!(fit.slope().unwrap() >= 0.9, "{fit:?}");
    }
}

#[test]
fn cones_have_exactly_flat_profiles() {
    for name in ["cone:clifford_legendrian_torus", "cone:legendrian_great_circle_twisted", "real_slice"] {
        for field in [ProfileField::TTop, ProfileField::XPerp] {
            for fit in fits(name, field) {
                assert_eq!(fit, DecayFit::ExactZero, "{name} {field:?}");
            }
        }
    }
}

#[test]
fn minimal_horizontal_examples_are_strongly_horizontal() {
    for name in ["geodesic", "displaced_slice", "real_slice", "cone:clifford_legendrian_torus"] {
        let flags = regularity_classification(&compact(name), TOL).unwrap();
        assert!(flags.weakly_regular && flags.quasi_normal && flags.weakly_horizontal, "{name}: {flags:?}");
        assert!(flags.strongly_horizontal(TOL), "{name}: {flags:?}");
    }
}

#[test]
fn isotropic_examples_have_horizontal_boundaries() {
    for name in ["displaced_slice", "real_slice", "cone:clifford_legendrian_torus"] {
        let flags = regularity_classification(&compact(name), TOL).unwrap();
        assert!(flags.theta_limit < TOL, "{name}: {flags:?}");
    }
}

#[test]
fn boundary_second_fundamental_form_is_umbilic_along_the_radial_direction() {
    for name in ["geodesic", "displaced_slice"] {
        let sigma = compact(name);
        for ray in default_rays(&sigma, 2) {
            let r = boundary_mean_curvature_residual(&sigma, &ray, &default_s_list()).unwrap();
            assert!(r < TOL, "{name}: {r}");
        }
    }
}

fn unit(v: Vec<f64>) -> AmbientVector {
    let v = AmbientVector::from_vec(v);
    &v / v.norm()
}

#[test]
fn reparametrization_round_trip() {
    let x = unit(vec![0.3, -0.5, 0.2, 0.7]);
    let n = unit(vec![0.5, 0.3, 0.0, 0.0]);
    let f = |rho: f64| &x * rho + &n * (0.2 * (1.0 - rho) * rho);
    let modified = |sigma: f64| bergman_reparam(&f, &[sigma], ReparamDirection::BergmanToModified).unwrap().remove(0);
    let params: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let back = bergman_reparam(&modified, &params, ReparamDirection::ModifiedToBergman).unwrap();
    for (rho, g) in params.iter().zip(&back) {
        assert!((g - f(*rho)).norm() < 1e-10, "rho = {rho}");
    }
}

#[test]
fn radial_derivative_of_the_modified_ray_is_the_boundary_point() {
    let x = unit(vec![1.0, 0.0, 0.0, 0.0]);
    let n = unit(vec![0.0, 0.0, 1.0, 0.0]);
    // F = X + (1 - rho) a_1 with a_1 = -X + 0.3 n
    let f = |rho: f64| &x * rho + &n * (0.3 * (1.0 - rho));
    let sigmas: Vec<f64> = (1..=8).map(|k| 1.0 - 1e-3 * k as f64).collect();
    let samples = bergman_reparam(&f, &sigmas, ReparamDirection::BergmanToModified).unwrap();
    let c = boundary_taylor(&sigmas, &samples, 3).unwrap();
    assert!((&c[0] - &x).norm() < 1e-10);
    // F~(sigma) = X - (1 - sigma) dF~/dsigma(1) + ...
    assert!((&c[1] + &x).norm() < 1e-6, "{}", c[1]);
}

#[test]
fn quadratic_modified_input_gives_a_c1_bergman_ray() {
    let x = unit(vec![0.0, 1.0, 0.0, 0.0]);
    let b2 = AmbientVector::from_vec(vec![0.4, 0.0, -0.2, 0.1]);
    let g = |sigma: f64| &x * sigma + &b2 * (0.5 * (1.0 - sigma).powi(2));
    let rhos: Vec<f64> = (1..=8).map(|k| 1.0 - 1e-7 * k as f64).collect();
    let samples = bergman_reparam(&g, &rhos, ReparamDirection::ModifiedToBergman).unwrap();
    let c = boundary_taylor(&rhos, &samples, 1).unwrap();
    assert!((&c[0] - &x).norm() < 1e-9);
    // G = rho X + (1 - rho) b_2 + O((1 - rho)^{3/2})
    let expected = &b2 - &x;
    assert!((&c[1] - &expected).norm() < 2e-3 * b2.norm(), "{} vs {}", c[1], expected);
}
