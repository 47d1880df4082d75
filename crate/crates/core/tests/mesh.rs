use cubical_forms::combinatorics::small_cube_count;
use cubical_forms::dof::dof_value;
use cubical_forms::forms::basis_form;
use cubical_forms::mesh::{pullback_basis, structured_mesh, CubicalMesh, RefinedMesh};
use cubical_forms::quadrature::GaussLegendre;
use cubical_forms::smallcubes::enumerate_small_cubes;

/// One parallelotope cell `v0 + E x` with columns of `E` given.
fn cell(origin: &[f64], columns: &[Vec<f64>]) -> CubicalMesh {
    let n = origin.len();
    let vertices = (0..1usize << n)
        .map(|b| {
            (0..n)
                .map(|i| origin[i] + (0..n).filter(|j| (b >> j) & 1 == 1).map(|j| columns[j][i]).sum::<f64>())
                .collect()
        })
        .collect();
    CubicalMesh::new(n, vertices, vec![(0..1usize << n).collect()]).unwrap()
}

#[test]
fn pulled_back_basis_integrates_to_reference_dof() {
    let meshes = [
        cell(&[0.5, -1.0], &[vec![2.0, 0.3], vec![-0.4, 1.5]]),
        // orientation-reversing
        cell(&[0.0, 0.0], &[vec![0.0, 1.0], vec![1.0, 0.0]]),
        cell(&[1.0, 0.0, 2.0], &[vec![1.0, 0.2, 0.0], vec![0.3, 0.9, 0.1], vec![-0.2, 0.1, 1.2]]),
    ];
    for mesh in &meshes {
        let n = mesh.dim();
        let map = mesh.cell_map(0);
        for k in 1..=3 {
            let rule = GaussLegendre::new(k + 2);
            for p in 0..=n {
                let scale = (1.0 / k as f64).powi(p as i32);
                for sc in enumerate_small_cubes(n, p, k).unwrap() {
                    let form = basis_form(&sc);
                    let pulled = pullback_basis(map, &form);
                    let pv = map.push_multivector(sc.directions());
                    let integral: f64 = rule
                        .tensor(p)
                        .iter()
                        .map(|(t, w)| {
                            let y = map.apply(&sc.point_at(t));
                            let v = pulled.evaluate(&y).unwrap();
                            assert!(v.inside_cell);
                            w * v.components.iter().zip(&pv).map(|(a, b)| a * b).sum::<f64>()
                        })
                        .sum::<f64>()
                        * scale;
                    let reference = dof_value(&sc, &sc).unwrap();
                    assert!(
                        (integral - reference).abs() <= 1e-10,
                        "n={n} k={k} p={p} {:?}: {integral} vs {reference}",
                        sc.key()
                    );
                }
            }
        }
    }
}

#[test]
fn boundary_of_boundary_on_structured_meshes() {
    for n in 1..=3 {
        for k in 1..=3 {
            for m in 1..=4 {
                for shear in [0.0, 0.3] {
                    let refined = RefinedMesh::new(structured_mesh(n, m, shear).unwrap(), k).unwrap();
                    assert!(refined.boundary_of_boundary_is_zero(), "n={n} k={k} m={m} shear={shear}");
                }
            }
        }
    }
}

#[test]
fn single_cell_counts_match_dimension_formula() {
    for n in 1..=4 {
        for k in 1..=3 {
            let refined = RefinedMesh::new(structured_mesh(n, 1, 0.2).unwrap(), k).unwrap();
            for p in 0..=n {
                assert_eq!(refined.count(p), small_cube_count(n, p, k), "n={n} k={k} p={p}");
            }
        }
    }
}

#[test]
fn structured_counts_follow_the_fine_grid() {
    // m cells per axis refined at order k pave like one cell refined at
    // order mk
    for (n, m, k) in [(2, 3, 2), (3, 2, 2), (2, 4, 3)] {
        let refined = RefinedMesh::new(structured_mesh(n, m, 0.0).unwrap(), k).unwrap();
        for p in 0..=n {
            assert_eq!(refined.count(p), small_cube_count(n, p, m * k), "n={n} m={m} k={k} p={p}");
        }
    }
}

#[test]
fn mesh_file_round_trip_through_disk() {
    let mesh = structured_mesh(2, 2, 0.25).unwrap();
    let dir = std::env::temp_dir().join(format!("cubical-forms-mesh-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("mesh.json");
    std::fs::write(&path, serde_json::to_string(&mesh.to_file()).unwrap()).unwrap();
    let back = cubical_forms::mesh::load_mesh(&path).unwrap();
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.cells(), mesh.cells());
    std::fs::remove_dir_all(dir).unwrap();
}
