use std::collections::HashSet;

use pdlab::fixtures::{generate, FamilySpec};
use pdlab::io::GraphFile;
use pdlab::suite::{parse_config, run_suite};
use pdlab::{Graph, Space};

fn coord_keys(g: &Graph) -> HashSet<Vec<i64>> {
    g.coords().unwrap().iter().map(|c| c.iter().map(|v| (v * 1e9).round() as i64).collect()).collect()
}

#[test]
fn refinements_keep_diameter_mass_and_vertices() {
    for family in ["gasket", "carpet"] {
        let spec = |level| match family {
            "gasket" => FamilySpec::Gasket { level, multiplier: None },
            _ => FamilySpec::Carpet { level, multiplier: None },
        };
        let mut previous: Option<(f64, HashSet<Vec<i64>>)> = None;
        for level in 1..=3 {
            let g: Graph = generate(&spec(level)).unwrap();
            assert!((g.mu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let keys = coord_keys(&g);
            let diam = Space::new(g).unwrap().diameter();
            if let Some((d, coarse)) = &previous {
                assert!((diam - d).abs() < 1e-9, "{family} level {level}: {diam} vs {d}");
                assert!(coarse.is_subset(&keys), "{family} level {level} does not contain the coarser vertices");
            }
            previous = Some((diam, keys));
        }
    }
}

#[test]
fn generation_is_bit_identical() {
    let spec = FamilySpec::Random { n: 25, extra: 12, seed: 42 };
    let a = serde_json::to_string(&GraphFile::from_graph(&generate::<f64>(&spec).unwrap())).unwrap();
    let b = serde_json::to_string(&GraphFile::from_graph(&generate::<f64>(&spec).unwrap())).unwrap();
    assert_eq!(a, b);
}

#[test]
fn path_suite_matches_capacity_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[settings]\nrestarts = 4\n\n[[families]]\nfamily = \"path\"\nlevels = [8]\np = [2.0]\n";
    let cfg = parse_config(text, false).unwrap();
    let out = run_suite(&cfg, Some(dir.path())).unwrap();
    assert!(out.passed);
    assert_eq!(out.reports.len(), 1);
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.reports[0]).unwrap()).unwrap();
    let checks = rep["checks"].as_array().unwrap();
    let oracle = checks.iter().find(|c| c["name"] == "capacity_oracle").unwrap();
    assert_eq!(oracle["passed"], true);
    assert!(dir.path().join("summary.csv").exists());
}
