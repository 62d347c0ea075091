mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;

use mlqmc_evp::fem::{assemble_mass, assemble_stiffness, restrict_to_interior};
use mlqmc_evp::mesh::{build_uniform_mesh, TriMesh};
use mlqmc_evp::problems::{constant, problem1, problem2, CoefficientSeries, ParamVector};

use common::{dense, generalized_eigen};

const QUAD: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Element-by-element dense assembly of `int a grad u . grad v + b u v`.
fn naive_stiffness(mesh: &TriMesh, coeff: impl Fn([f64; 2]) -> (f64, f64)) -> DMatrix<f64> {
    let n = mesh.num_nodes();
    let mut k = DMatrix::zeros(n, n);
    for tri in mesh.elements() {
        let p = tri.map(|v| mesh.nodes()[v]);
        let det =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = det.abs() / 2.0;
        // Gradient of the hat function at vertex i is the rotated opposite edge over det.
        let grad = |i: usize| {
            let (j, l) = ((i + 1) % 3, (i + 2) % 3);
            [(p[j][1] - p[l][1]) / det, (p[l][0] - p[j][0]) / det]
        };
        for bary in QUAD {
            let x = [
                bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
            ];
            let (a, b) = coeff(x);
            for i in 0..3 {
                for j in 0..3 {
                    let (gi, gj) = (grad(i), grad(j));
                    let value = a * (gi[0] * gj[0] + gi[1] * gj[1]) + b * bary[i] * bary[j];
                    k[(tri[i], tri[j])] += area / 3.0 * value;
                }
            }
        }
    }
    k
}

fn naive_mass(mesh: &TriMesh) -> DMatrix<f64> {
    let n = mesh.num_nodes();
    let mut m = DMatrix::zeros(n, n);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let area = mesh.signed_area(e).abs();
        for i in 0..3 {
            for j in 0..3 {
                m[(tri[i], tri[j])] += area / 12.0 * if i == j { 2.0 } else { 1.0 };
            }
        }
    }
    m
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

fn problem1_coefficient(y: &[f64]) -> impl Fn([f64; 2]) -> (f64, f64) + '_ {
    move |x| {
        let a = 1.0
            + y.iter()
                .enumerate()
                .map(|(i, yj)| {
                    let j = (i + 1) as f64;
                    yj / (j * j) * (j * PI * x[0]).sin() * ((j + 1.0) * PI * x[1]).sin()
                })
                .sum::<f64>();
        (a, 0.0)
    }
}

#[test]
fn stiffness_matches_naive_assembly_problem1() {
    let mesh = build_uniform_mesh(3).unwrap();
    let p = problem1(2.0).unwrap();
    let mut yv = vec![0.0; 4];
    yv[0] = 0.5;
    let y = ParamVector::new(yv.clone()).unwrap();
    let got = dense(&assemble_stiffness(&mesh, &p, &y).unwrap());
    let want = naive_stiffness(&mesh, problem1_coefficient(&yv));
    assert!(max_diff(&got, &want) < 1e-12, "{}", max_diff(&got, &want));

    let yv = vec![0.3, -0.45, 0.1, 0.49, -0.2, 0.05, -0.5, 0.25];
    let y = ParamVector::new(yv.clone()).unwrap();
    let got = dense(&assemble_stiffness(&mesh, &p, &y).unwrap());
    let want = naive_stiffness(&mesh, problem1_coefficient(&yv));
    assert!(max_diff(&got, &want) < 1e-12);
}

#[test]
fn stiffness_with_reaction_matches_naive_assembly_problem2() {
    let mesh = build_uniform_mesh(4).unwrap();
    let p: CoefficientSeries = problem2(2.0, 2.0, 2.0, 2.0).unwrap();
    let y = ParamVector::new(vec![0.4, -0.3, 0.2, -0.1, 0.5, -0.5]).unwrap();
    let got = dense(&assemble_stiffness(&mesh, &p, &y).unwrap());
    let want = naive_stiffness(&mesh, |x| p.eval(x, &y).unwrap());
    assert!(max_diff(&got, &want) < 1e-12);
}

#[test]
fn mass_matches_exact_element_matrices() {
    for m in [3, 4] {
        let mesh = build_uniform_mesh(m).unwrap();
        let got = dense(&assemble_mass(&mesh, &problem1(2.0).unwrap()).unwrap());
        assert!(max_diff(&got, &naive_mass(&mesh)) < 1e-15);
    }
}

fn laplace_ritz_values(m: i64) -> Vec<f64> {
    let mesh = build_uniform_mesh(m).unwrap();
    let p = constant(1.0, 0.0, 1.0).unwrap();
    let a = restrict_to_interior(
        &mesh,
        &assemble_stiffness(&mesh, &p, &ParamVector::zeros(1)).unwrap(),
    )
    .unwrap();
    let mm = restrict_to_interior(&mesh, &assemble_mass(&mesh, &p).unwrap()).unwrap();
    generalized_eigen(&dense(&a), &dense(&mm)).0
}

#[test]
fn laplace_ritz_values_bound_the_continuous_spectrum() {
    let pi2 = PI * PI;
    let coarse = laplace_ritz_values(3);
    assert!(coarse[0] >= 2.0 * pi2);
    assert!(coarse[1] >= 5.0 * pi2 && coarse[2] >= 5.0 * pi2);
    assert!(coarse[3] >= 8.0 * pi2);
    let fine = laplace_ritz_values(4);
    for k in 0..4 {
        assert!(fine[k] < coarse[k], "refinement must lower Ritz value {k}");
    }
    assert!((fine[0] - 2.0 * pi2) / 2.0 / pi2 < 0.02);
}
