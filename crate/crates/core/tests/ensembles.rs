//! Distributional properties of the compressor families.

use crb_compress::mcharness::ks_two_sample;
use crb_compress::randcomp::{CompressorSpec, Family};
use crb_compress::ComplexMatrix;

const DRAWS: u64 = 10_000;

fn first_entry_modulus(phi: &ComplexMatrix) -> f64 {
    phi[(0, 0)].norm()
}

fn first_row_norm(phi: &ComplexMatrix) -> f64 {
    phi.row(0).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[test]
fn right_unitary_invariance() {
    let n = 12;
    let u = CompressorSpec::new(n, n, Family::Stiefel, 777).draw(0).unwrap();
    for family in Family::ALL {
        let spec = CompressorSpec::new(4, n, family, 31);
        // Independent draws on either side so the comparison is a genuine two-sample test.
        let plain: Vec<ComplexMatrix> = (0..DRAWS).map(|t| spec.draw(t).unwrap()).collect();
        let rotated: Vec<ComplexMatrix> = (DRAWS..2 * DRAWS).map(|t| spec.draw(t).unwrap() * &u).collect();
        if family == Family::Stiefel {
            // Unit row norms on both sides; a KS test would only see rounding noise.
            for phi in plain.iter().chain(&rotated) {
                assert!((first_row_norm(phi) - 1.0).abs() < 1e-12);
            }
        }
        let stats: &[fn(&ComplexMatrix) -> f64] = if family == Family::Stiefel {
            &[first_entry_modulus]
        } else {
            &[first_entry_modulus, first_row_norm]
        };
        for stat in stats {
            let a: Vec<f64> = plain.iter().map(stat).collect();
            let b: Vec<f64> = rotated.iter().map(stat).collect();
            let r = ks_two_sample(&a, &b, 0.01).unwrap();
            assert!(r.pass, "{family}: {r:?}");
        }
    }
}

#[test]
fn all_families_have_full_row_rank() {
    let (m, n) = (8, 32);
    for family in Family::ALL {
        let spec = CompressorSpec::new(m, n, family, 4242);
        let worst = (0..100_000u64)
            .map(|t| {
                let sv = spec.draw(t).unwrap().singular_values();
                sv.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(worst > 1e-8, "{family}: smallest singular value {worst}");
    }
}

#[test]
fn gaussian_rows_and_spherical_rows_share_row_norm_law() {
    let n = 10;
    let g = CompressorSpec::new(1, n, Family::Gaussian, 1);
    let s = CompressorSpec::new(1, n, Family::SphericalRows, 2);
    let a: Vec<f64> = (0..DRAWS).map(|t| first_row_norm(&g.draw(t).unwrap())).collect();
    let b: Vec<f64> = (0..DRAWS).map(|t| first_row_norm(&s.draw(t).unwrap())).collect();
    assert!(ks_two_sample(&a, &b, 0.01).unwrap().pass);
}
