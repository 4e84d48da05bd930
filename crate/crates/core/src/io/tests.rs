use std::path::PathBuf;

use ndarray::Array2;
use proptest::prelude::*;

use super::*;
use crate::fixtures;
use crate::network::{validate_network, LinkId};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/braess")
}

#[test]
fn bundled_braess_files_load() {
    let dir = fixture_dir();
    let (nodes, links) = load_network(&dir.join("network.toml")).unwrap();
    assert_eq!(nodes.len(), 4);
    assert_eq!(links.len(), 5);
    let paths = load_paths(&dir.join("paths.toml")).unwrap();
    assert_eq!(paths.len(), 8);
    let ods = load_demand(&dir.join("demand.csv")).unwrap();
    assert_eq!(ods.len(), 4);
    let net = validate_network(&nodes, &links, &paths, &ods).unwrap();
    let ids: Vec<PathId> = net.paths.iter().map(|p| p.id).collect();
    let h = load_departures(&dir.join("departures.csv"), &ids, 100).unwrap();
    assert_eq!(h.dim(), (8, 100));
}

#[test]
fn bundled_files_match_fixture_builder() {
    let dir = fixture_dir();
    let (nodes, links) = load_network(&dir.join("network.toml")).unwrap();
    let paths = load_paths(&dir.join("paths.toml")).unwrap();
    let ods = load_demand(&dir.join("demand.csv")).unwrap();
    let (n, l, p, o) = fixtures::braess_raw();
    assert_eq!((nodes, links, paths, ods), (n, l, p, o));
}

#[test]
fn short_departure_rows_are_a_dimension_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let ids: Vec<PathId> = (1..=8).map(PathId).collect();
    write_matrix_csv(&path, &ids, &Array2::from_elem((8, 99), 0.1)).unwrap();
    let err = load_departures(&path, &ids, 100).unwrap_err();
    assert!(matches!(err, FormatError::Dimension { cols: 99, .. }));
}

#[test]
fn negative_cell_reports_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let ids = vec![PathId(1), PathId(2)];
    let mut m = Array2::from_elem((2, 5), 0.1);
    m[[1, 3]] = -0.5;
    write_matrix_csv(&path, &ids, &m).unwrap();
    let err = load_departures(&path, &ids, 5).unwrap_err();
    assert!(matches!(err, FormatError::NegativeRate { path: PathId(2), step: 3, .. }));
    let msg = err.to_string();
    assert!(msg.contains("path 2") && msg.contains("step 3"), "{msg}");
}

#[test]
fn unknown_path_in_departures() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    write_matrix_csv(&path, &[PathId(9)], &Array2::zeros((1, 3))).unwrap();
    assert!(matches!(
        load_departures(&path, &[PathId(1)], 3),
        Err(FormatError::UnknownPath(PathId(9)))
    ));
}

#[test]
fn empty_links_table() {
    let err = parse_network(Path::new("n.toml"), "[[nodes]]\nid = 1\n").unwrap_err();
    assert!(err.to_string().contains("empty network"));
}

#[test]
fn duplicate_link_id_is_named() {
    let (nodes, mut links, _, _) = fixtures::braess_raw();
    links[4].id = LinkId(2);
    let text = network_to_toml(&nodes, &links);
    let err = parse_network(Path::new("n.toml"), &text).unwrap_err();
    assert!(matches!(err, FormatError::DuplicateId { kind: "link", id: 2 }));
    assert!(err.to_string().contains("link id 2"));
}

#[test]
fn unknown_field_is_a_parse_error_with_location() {
    let text = "[[links]]\nid = 1\ntail = 1\nhead = 2\nlength_m = 1.0\nfree_speed_mps = 1.0\ncapacity_vps = 1.0\nlanes = 2\n";
    let err = parse_network(Path::new("n.toml"), text).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, FormatError::Parse { .. }));
    assert!(msg.contains("lanes") && msg.contains("line"), "{msg}");
}

#[test]
fn network_toml_round_trip() {
    let (nodes, links, _, _) = fixtures::braess_raw();
    let text = network_to_toml(&nodes, &links);
    assert_eq!(parse_network(Path::new("n.toml"), &text).unwrap(), (nodes, links));
}

#[test]
fn braess_dnl_writes_one_row_per_link_step() {
    let net = fixtures::braess();
    let grid = crate::grid::TimeGrid::new(0.0, 500.0, 5.0).unwrap();
    let h = fixtures::constant_departures(&net, &grid, 0.05, 0.0, 200.0);
    let dnl = crate::dnl::run_dnl(&net, &h, &grid, &crate::junction::FifoPriority).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dnl_outputs(dir.path(), &net, &dnl).unwrap();
    let text = std::fs::read_to_string(dir.path().join("link_timeseries.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 5 * 100);
    assert!(text.starts_with("link_id,step,time_s,inflow_vps,outflow_vps,density_vpm"));
    assert!(dir.path().join("plot.py").exists());
    let summary: DnlSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.links, 5);
}

#[test]
fn empty_horizon_is_rejected_before_write() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let err = write_matrix_csv(&path, &[PathId(1)], &Array2::zeros((1, 0))).unwrap_err();
    assert!(matches!(err, FormatError::EmptyHorizon));
    assert!(!path.exists());
}

#[test]
fn unwritable_directory() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = write_plot_script(&blocker.join("sub")).unwrap_err();
    assert!(matches!(err, FormatError::Io { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn departures_round_trip(rows in 1usize..6, cols in 1usize..20, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((rows, cols), |_| {
            if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..10.0) * 10f64.powi(rng.random_range(-6..3)) }
        });
        let ids: Vec<PathId> = (0..rows as u32).map(|i| PathId(100 - i)).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_matrix_csv(&path, &ids, &m).unwrap();
        let back = load_departures(&path, &ids, cols).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }
}
