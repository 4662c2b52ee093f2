use kslab::formats::{read_field, read_series, write_field, write_field_csv, write_series, FIELD_MAGIC};
use kslab_core::diagnostics::DiagnosticsRecord;
use kslab_core::{Field, Grid};
use proptest::prelude::*;
use std::sync::Arc;

fn record(t: f64, x: f64, with_dist: bool) -> DiagnosticsRecord {
    DiagnosticsRecord {
        t,
        mass_u: 1.0 + x,
        mass_v: 2.0 * x,
        mass_w: 3.0 * x,
        linf_u: 4.0 + x,
        entropy: -x,
        dirichlet_z: x * x,
        energy_f: x - 1.0,
        fisher_u: 1e10 * x,
        lap_z_sq: 1e-300 * x,
        grad_z_l4: x / 3.0,
        taxis_l1: x / 7.0,
        w1r_v: x.sqrt(),
        w1r_w: x.ln_1p(),
        lp_u: vec![(1.2, x), (2.0, 2.0 * x), (2.5, 3.0 * x)],
        phi: vec![1.0 + x, -x, 0.1 * x],
        w1r_dist_v: with_dist.then_some(0.5 * x),
        w1r_dist_w: with_dist.then_some(0.25 * x),
    }
}

proptest! {
    #[test]
    fn series_round_trips_exactly(xs in prop::collection::vec(0.0f64..1e3, 1..20), with_dist: bool) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let records: Vec<_> = xs.iter().enumerate().map(|(k, x)| record(k as f64 * 1e-3, *x, with_dist)).collect();
        let names = vec!["one".to_string(), "cos_x".to_string(), "gauss".to_string()];
        write_series(&path, &records, &names).unwrap();
        let back = read_series(&path).unwrap();
        prop_assert_eq!(back.records, records);
        prop_assert_eq!(back.phi_names, names);
    }

    #[test]
    fn fields_round_trip_on_every_geometry(seed in 0u64..1000, kind in 0usize..4) {
        let grid = Arc::new(match kind {
            0 => Grid::interval(2.5, 17).unwrap(),
            1 => Grid::rectangle(1.0, 2.0, 9, 13).unwrap(),
            2 => Grid::radial_disk(1.5, 11).unwrap(),
            _ => Grid::radial_ball(0.5, 7).unwrap(),
        });
        let s = seed as f64;
        let f = Field::from_fn(grid.clone(), |[x, y]| (s + 3.0 * x - y).sin().abs() * 1e-7 + x * y);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.bin");
        write_field(&path, &f).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        prop_assert_eq!(bytes.len(), 44 + 8 * grid.len());
        let back = read_field(&path).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.grid().geometry(), grid.geometry());
        prop_assert_eq!(back.grid().extents(), grid.extents());
    }
}

#[test]
fn binary_header_layout() {
    let grid = Arc::new(Grid::rectangle(1.0, 2.0, 5, 4).unwrap());
    let f = Field::from_fn(grid, |[x, _]| x);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    write_field(&path, &f).unwrap();
    let b = std::fs::read(&path).unwrap();
    assert_eq!(&b[..4], FIELD_MAGIC);
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 1);
    assert_eq!(u64::from_le_bytes(b[12..20].try_into().unwrap()), 5);
    assert_eq!(u64::from_le_bytes(b[20..28].try_into().unwrap()), 4);
    assert_eq!(f64::from_le_bytes(b[28..36].try_into().unwrap()), 1.0);
    assert_eq!(f64::from_le_bytes(b[36..44].try_into().unwrap()), 2.0);
    // row-major: second value is cell (i=1, j=0)
    assert_eq!(f64::from_le_bytes(b[44..52].try_into().unwrap()), 0.1);
    assert_eq!(f64::from_le_bytes(b[52..60].try_into().unwrap()), 0.30000000000000004);
}

#[test]
fn corrupted_snapshots_are_rejected() {
    let grid = Arc::new(Grid::interval(1.0, 4).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.bin");
    write_field(&path, &Field::zeros(grid)).unwrap();
    let mut b = std::fs::read(&path).unwrap();
    b.pop();
    std::fs::write(&path, &b).unwrap();
    assert!(read_field(&path).unwrap_err().to_string().contains("payload size"));
    b[0] = b'X';
    std::fs::write(&path, &b).unwrap();
    assert!(read_field(&path).is_err());
}

#[test]
fn field_csv_lists_cell_centers() {
    let grid = Arc::new(Grid::rectangle(1.0, 1.0, 4, 4).unwrap());
    let f = Field::from_fn(grid, |[x, y]| x + 10.0 * y);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    write_field_csv(&path, &f).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,y,value");
    assert_eq!(lines.len(), 17);
    assert_eq!(lines[6], "3.75e-1,3.75e-1,4.125e0");
}

#[test]
fn series_missing_a_column_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.csv");
    std::fs::write(&path, "t,mass_u\n0e0,1e0\n").unwrap();
    assert!(read_series(&path).unwrap_err().to_string().contains("missing column"));
}
