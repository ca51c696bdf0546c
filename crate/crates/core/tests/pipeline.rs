use std::f64::consts::PI;

use lerayflow::heat_lift::{lift_to_grid, oseen_profile};
use lerayflow::initial_data::circulation_and_flux;
use lerayflow::{build_homogeneous_field, eval_u0, CircleTrace, Grid, GridVectorField, LerayError, ScalarField};

fn cos2_sin() -> CircleTrace {
    CircleTrace::new(2.0 * PI, vec![0.0, 1.0], vec![0.5], 1.0).unwrap()
}

#[test]
fn datum_is_homogeneous_with_given_circulation_and_no_flux() {
    let field = build_homogeneous_field(cos2_sin());
    let cf = circulation_and_flux(&field);
    assert!((cf.circulation - 2.0 * PI).abs() < 1e-12);
    assert!(cf.flux_ok && cf.flux.abs() < 1e-12);
    let x = [0.7, -1.3];
    let u = eval_u0(&field, x).unwrap();
    let u3 = eval_u0(&field, [3.0 * x[0], 3.0 * x[1]]).unwrap();
    assert!((u[0] - 3.0 * u3[0]).abs() < 1e-14 && (u[1] - 3.0 * u3[1]).abs() < 1e-14);
    assert!(eval_u0(&field, [0.0, 0.0]).is_err());
}

#[test]
fn swirl_lift_on_grid_is_the_oseen_vortex() {
    let grid = Grid::new(8.0, 32).unwrap();
    let v0 = lift_to_grid(&build_homogeneous_field(CircleTrace::swirl(3.0)), &grid).unwrap();
    let exact = GridVectorField::from_fn(grid, |y| oseen_profile(3.0, y));
    assert!(v0.axpy(-1.0, &exact).unwrap().max_norm() < 1e-6 * exact.max_norm());
}

#[test]
fn fields_round_trip_through_files() {
    let dir = std::env::temp_dir().join(format!("lerayflow-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let grid = Grid::new(4.0, 16).unwrap();
    let v = GridVectorField::from_fn(grid, |y| [y[0].sin(), y[1] * y[0]]);
    let q = ScalarField::from_fn(grid, |y| y[0] - 2.0 * y[1]);

    let vp = dir.join("v.lfg");
    v.write_binary(std::fs::File::create(&vp).unwrap()).unwrap();
    assert_eq!(
        GridVectorField::read_binary(std::fs::File::open(&vp).unwrap()).unwrap(),
        v
    );
    let qp = dir.join("q.lfg");
    q.write_binary(std::fs::File::create(&qp).unwrap()).unwrap();
    assert_eq!(ScalarField::read_binary(std::fs::File::open(&qp).unwrap()).unwrap(), q);

    let mut bytes = std::fs::read(&vp).unwrap();
    bytes[0] = b'X';
    assert!(matches!(
        GridVectorField::read_binary(&bytes[..]),
        Err(LerayError::Format(_))
    ));

    let mut csv = Vec::new();
    v.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,u1,u2"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row, vec![-4.0, -4.0, v.u[0][0], v.u[1][0]]);
    assert_eq!(text.lines().count(), 1 + grid.len());
    std::fs::remove_dir_all(&dir).unwrap();
}
