use super::oracle::Dense;
use super::*;
use crate::elements::ElementFamily;
use crate::mesh::Mesh;
use crate::properties::{dense_gap, random_state, random_vec, skew_defect};
use crate::randfield::{affine_from_draws, kl_from_draws, sample_constant};
use crate::stepper::{CoupledState, ZeroProblem};
use crate::verify::build_constant_k_problem;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spaces(n: usize, fam: ElementFamily) -> Spaces {
    Spaces::new(Mesh::unit_channel(n).unwrap(), fam).unwrap()
}

fn params() -> PhysicalParams {
    PhysicalParams {
        pr: 0.8,
        ra: 1.7,
        c_a: 1.3,
        l: 0.9,
        k_f: 1.1,
        k_p: 0.7,
        gamma: 3.0,
    }
}

fn check_dense_equivalence(fam: ElementFamily, n: usize, sample: &ConductivitySample, seed: u64) {
    let gaps = dense_gap(fam, n, sample, seed);
    for (name, g) in [
        "navier-stokes",
        "fluid temperature",
        "darcy",
        "porous temperature",
    ]
    .iter()
    .zip(gaps)
    {
        assert!(g <= 1e-12, "{name}: max entry difference {g:e}");
    }
}

#[test]
fn dense_equivalence_two_triangles_per_subdomain() {
    let k = affine_from_draws(0.4, [0.3, -0.9]);
    check_dense_equivalence(ElementFamily::Bdm1, 1, &k, 1);
    check_dense_equivalence(ElementFamily::Rt0, 1, &k, 2);
}

#[test]
fn dense_equivalence_with_interior_dofs_and_variable_k() {
    let k = kl_from_draws(1.0, 0.2, 2, 0.5, vec![0.5, -1.0, 1.2, 0.3, -0.6]);
    check_dense_equivalence(ElementFamily::Bdm1, 2, &k, 3);
    check_dense_equivalence(ElementFamily::Rt0, 3, &sample_constant(2.21).unwrap(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn convection_forms_are_skew(seed in 0u64..10_000) {
        let d = skew_defect(seed);
        prop_assert!(d <= 1e-13, "relative defect {d:e}");
    }
}

#[test]
fn p1_stiffness_energy_of_linear_functions() {
    // With Δt huge and γ = 0 the fluid temperature matrix is the stiffness.
    let s = spaces(3, ElementFamily::Bdm1);
    let k = sample_constant(1.0).unwrap();
    let p = PhysicalParams {
        gamma: 0.0,
        ..PhysicalParams::default()
    };
    let ctx = FormContext::new(p, &k, 1e300, &s).unwrap();
    let asm = Assembler::new(&s, ctx).unwrap();
    let m = &asm.thf_base;
    let nodal = |f: &dyn Fn([f64; 2]) -> f64| -> Vec<f64> {
        let mut v = vec![0.0; s.theta_f.n_dofs];
        for (vx, x) in s.mesh.vertices.iter().enumerate() {
            if let Some(d) = s.theta_f.vertex_dof(vx) {
                v[d] = f(*x);
            }
        }
        v
    };
    // ∫|∇θ|² over the unit fluid square
    for (f, e) in [
        (&(|x: [f64; 2]| x[0]) as &dyn Fn([f64; 2]) -> f64, 1.0),
        (&|x: [f64; 2]| x[1], 1.0),
        (&|x: [f64; 2]| 2.0 * x[0] - 3.0 * x[1] + 5.0, 13.0),
        (&|_x: [f64; 2]| 4.0, 0.0),
    ] {
        let v = nodal(f);
        assert!(
            (m.quadratic_form(&v) - e).abs() < 1e-12,
            "energy {} vs {e}",
            m.quadratic_form(&v)
        );
    }
}

#[test]
fn unit_square_stiffness_by_hand() {
    // Each half of the square has the stiffness [[1,-½,-½],[-½,½,0],[-½,0,½]]
    // with the right-angle vertex first.
    let k = sample_constant(1.0).unwrap();
    let p = PhysicalParams {
        gamma: 0.0,
        ..PhysicalParams::default()
    };
    let s = spaces(1, ElementFamily::Bdm1);
    let ctx = FormContext::new(p, &k, 1e300, &s).unwrap();
    let asm = Assembler::new(&s, ctx).unwrap();
    let m = asm.thf_base.to_dense();
    // two cells share the diagonal edge; on the unit square the assembled
    // stiffness has diagonal 1 everywhere and -½ on the axis-parallel edges
    for i in 0..4 {
        assert!((m[i][i] - 1.0).abs() < 1e-12);
        let row: f64 = m[i].iter().sum();
        assert!(row.abs() < 1e-12);
    }
    let mut halves = 0;
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                let v = m[i][j];
                assert!(v.abs() < 1e-12 || (v + 0.5).abs() < 1e-12, "entry {v}");
                if (v + 0.5).abs() < 1e-12 {
                    halves += 1;
                }
            }
        }
    }
    assert_eq!(halves, 8);
}

#[test]
fn interface_penalty_matrix_is_scaled_edge_mass() {
    let s = spaces(1, ElementFamily::Bdm1);
    let k = sample_constant(1.0).unwrap();
    let ctx = FormContext::new(PhysicalParams::default(), &k, 0.1, &s).unwrap();
    let asm = Assembler::new(&s, ctx).unwrap();
    let trip = asm.interface_mass(Subdomain::Fluid, Subdomain::Porous);
    assert_eq!(trip.len(), 4);
    let l = s.interface[0].length;
    for (i, j, v) in trip {
        let same = {
            let vi = (0..s.mesh.vertices.len())
                .find(|&v| s.theta_f.vertex_dof(v) == Some(i))
                .unwrap();
            let vj = (0..s.mesh.vertices.len())
                .find(|&v| s.theta_p.vertex_dof(v) == Some(j))
                .unwrap();
            vi == vj
        };
        let expect = l / 6.0 * if same { 2.0 } else { 1.0 };
        assert!((v - expect).abs() < 1e-15, "{v} vs {expect}");
    }
}

#[test]
fn interface_flux_of_linear_temperature() {
    for n in [1, 4] {
        let s = spaces(n, ElementFamily::Bdm1);
        let mut th = vec![0.0; s.theta_f.n_dofs];
        for (v, x) in s.mesh.vertices.iter().enumerate() {
            if let Some(d) = s.theta_f.vertex_dof(v) {
                th[d] = x[1];
            }
        }
        let h = 1.0 / n as f64;
        for target in [Subdomain::Fluid, Subdomain::Porous] {
            let g = interface_flux_vector(&s, &th, target);
            let dm = if target == Subdomain::Fluid {
                &s.theta_f
            } else {
                &s.theta_p
            };
            for (v, x) in s.mesh.vertices.iter().enumerate() {
                let Some(d) = dm.vertex_dof(v) else { continue };
                let on_interface = (x[1] - 1.0).abs() < 1e-14;
                let corner = x[0].abs() < 1e-14 || (x[0] - 1.0).abs() < 1e-14;
                let expect = if !on_interface {
                    0.0
                } else if corner {
                    -h / 2.0
                } else {
                    -h
                };
                assert!(
                    (g[d] - expect).abs() < 1e-13,
                    "vertex {x:?}: {} vs {expect}",
                    g[d]
                );
            }
        }
    }
}

fn darcy_blocks(s: &Spaces, k: f64) -> Dense {
    let sample = sample_constant(k).unwrap();
    let ctx = FormContext::new(params(), &sample, 0.2, s).unwrap();
    Assembler::new(s, ctx).unwrap().darcy.to_dense()
}

#[test]
fn darcy_matrix_is_affine_in_conductivity() {
    let s = spaces(2, ElementFamily::Bdm1);
    let (m1, m2, m3) = (
        darcy_blocks(&s, 1.0),
        darcy_blocks(&s, 2.0),
        darcy_blocks(&s, 3.0),
    );
    let nu = s.velocity_p.n_dofs;
    let nphi = s.pressure_p.n_dofs;
    for i in 0..m1.len() {
        for j in 0..m1.len() {
            let d1 = m2[i][j] - m1[i][j];
            let d2 = m3[i][j] - m2[i][j];
            assert!((d1 - d2).abs() < 1e-12, "({i},{j})");
            // coupling block is linear in k
            if (i < nu && (nu..nu + nphi).contains(&j)) || (j < nu && (nu..nu + nphi).contains(&i))
            {
                assert!((m2[i][j] - 2.0 * m1[i][j]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn darcy_matrix_is_independent_of_step_data() {
    let s = spaces(2, ElementFamily::Bdm1);
    let k = affine_from_draws(0.5, [0.2, 0.9]);
    let ctx = FormContext::new(params(), &k, 0.2, &s).unwrap();
    let asm = Assembler::new(&s, ctx).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = build_constant_k_problem(1.0, 1.0);
    let a = asm
        .darcy(
            &random_vec(&mut rng, s.velocity_p.n_dofs),
            &random_vec(&mut rng, s.theta_p.n_dofs),
            &p,
            0.1,
        )
        .unwrap();
    let b = asm
        .darcy(
            &random_vec(&mut rng, s.velocity_p.n_dofs),
            &random_vec(&mut rng, s.theta_p.n_dofs),
            &p,
            0.9,
        )
        .unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_ne!(a.rhs, b.rhs);
}

#[test]
fn doubling_k_f_doubles_the_temperature_operator() {
    let s = spaces(2, ElementFamily::Bdm1);
    let k = sample_constant(1.0).unwrap();
    let base = |kf: f64| {
        let p = PhysicalParams {
            k_f: kf,
            ..PhysicalParams::default()
        };
        let ctx = FormContext::new(p, &k, 1e300, &s).unwrap();
        Assembler::new(&s, ctx).unwrap().thf_base.to_dense()
    };
    // stiffness and penalty both carry k_f
    let (a, b) = (base(1.0), base(2.0));
    for i in 0..a.len() {
        for j in 0..a.len() {
            assert!((b[i][j] - 2.0 * a[i][j]).abs() <= 1e-12 * a[i][j].abs().max(1.0));
        }
    }
}

#[test]
fn step_one_velocity_block_is_positive_definite() {
    let s = spaces(3, ElementFamily::Bdm1);
    let k = sample_constant(1.0).unwrap();
    let ctx = FormContext::new(params(), &k, 0.05, &s).unwrap();
    let asm = Assembler::new(&s, ctx).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let st = random_state(&s, &mut rng);
    let sys = asm.ns(&st.u_f, &st.theta_f, &ZeroProblem, 0.05).unwrap();
    let nv2 = 2 * s.velocity_f.n_dofs;
    for _ in 0..50 {
        let mut x = random_vec(&mut rng, sys.dim());
        for v in &mut x[nv2..] {
            *v = 0.0;
        }
        assert!(sys.matrix.quadratic_form(&x) > 0.0);
    }
}

#[test]
fn zero_data_gives_zero_loads() {
    let s = spaces(2, ElementFamily::Bdm1);
    let k = sample_constant(2.0).unwrap();
    let ctx = FormContext::new(params(), &k, 0.1, &s).unwrap();
    let asm = Assembler::new(&s, ctx).unwrap();
    let z = CoupledState::zeros(&s);
    let zp = ZeroProblem;
    assert!(asm
        .ns(&z.u_f, &z.theta_f, &zp, 0.1)
        .unwrap()
        .rhs
        .iter()
        .all(|&v| v == 0.0));
    assert!(asm
        .theta_f(&z.u_f, &z.theta_f, &z.theta_p, &zp, 0.1)
        .unwrap()
        .rhs
        .iter()
        .all(|&v| v == 0.0));
    assert!(asm
        .darcy(&z.u_p, &z.theta_p, &zp, 0.1)
        .unwrap()
        .rhs
        .iter()
        .all(|&v| v == 0.0));
    assert!(asm
        .theta_p(&z.u_p, &z.theta_p, &z.theta_f, &z.theta_f, &zp, 0.1)
        .unwrap()
        .rhs
        .iter()
        .all(|&v| v == 0.0));
}

#[test]
fn input_errors() {
    let s = spaces(1, ElementFamily::Bdm1);
    let k = sample_constant(1.0).unwrap();
    let ctx = FormContext::new(PhysicalParams::default(), &k, 0.1, &s).unwrap();
    let asm = Assembler::new(&s, ctx.clone()).unwrap();
    assert!(matches!(
        asm.ns(&[0.0; 3], &vec![0.0; s.theta_f.n_dofs], &ZeroProblem, 0.1),
        Err(AssemblyError::LengthMismatch { field: "u_f", .. })
    ));
    let bad = PhysicalParams {
        pr: 0.0,
        ..PhysicalParams::default()
    };
    assert!(matches!(
        FormContext::new(bad, &k, 0.1, &s),
        Err(AssemblyError::InvalidParameter { name: "pr", .. })
    ));
    assert!(matches!(
        FormContext::new(PhysicalParams::default(), &k, -1.0, &s),
        Err(AssemblyError::InvalidParameter { name: "dt", .. })
    ));
    // an affine field reaching zero inside the domain
    let neg = crate::randfield::ConductivitySample {
        kind: crate::randfield::ConductivityKind::AffineUniform {
            sigma: 2.0,
            lambda: [-1.0, -1.0],
        },
        bounds: (-1.0, -1.0),
        sample_index: None,
    };
    let ctx = FormContext {
        sample: &neg,
        ..ctx
    };
    assert!(matches!(
        Assembler::new(&s, ctx),
        Err(AssemblyError::NonpositiveConductivity { .. })
    ));
}
