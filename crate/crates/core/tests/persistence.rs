use geomflow::costs::CostSpace;
use geomflow::data::persist::{
    append_metrics, load_checkpoint, load_geometries, load_metrics, load_pairs, save_checkpoint, save_geometries, save_loss_curve,
    save_pairs, Checkpoint, RunMetrics, METRICS_HEADER,
};
use geomflow::data::{make_dataset, SizeHistogram, TemplateSpec};
use geomflow::flow::{sample_noise, CouplingPair, CouplingSet, PairSource, TrainConfig};
use geomflow::geometry::{Geometry, LatentGeometry};
use geomflow::nn::{ModelArch, VectorFieldModel};
use geomflow::Error;
use proptest::prelude::*;

fn checkpoint() -> Checkpoint {
    let data = make_dataset(&TemplateSpec::default(), 20).unwrap();
    Checkpoint {
        model: VectorFieldModel::init(ModelArch::new(4, 2, 8, 2), 3).unwrap(),
        sizes: SizeHistogram::from_geometries(&data),
        config: Some(TrainConfig::default()),
        data: Some("train.geoms.jsonl".into()),
    }
}

fn pairs() -> CouplingSet {
    let pairs = (0..5u64)
        .map(|i| {
            let n = 2 + i as usize;
            CouplingPair::new(sample_noise(n, 3, i), sample_noise(n, 3, 100 + i), PairSource::Estimated)
                .unwrap()
                .with_valid([None, Some(true), Some(false)][i as usize % 3])
        })
        .collect();
    CouplingSet::new(CostSpace::Latent, pairs)
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gflow.ckpt");
    let ckpt = checkpoint();
    save_checkpoint(&path, &ckpt).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
}

#[test]
fn checkpoint_wrong_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gflow.ckpt");
    save_checkpoint(&path, &checkpoint()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let end = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header = std::str::from_utf8(&bytes[..end]).unwrap().replacen("\"version\":1", "\"version\":999", 1);
    let mut patched = header.into_bytes();
    patched.extend_from_slice(&bytes[end..]);
    std::fs::write(&path, patched).unwrap();
    match load_checkpoint(&path).unwrap_err() {
        Error::Version { found, expected, .. } => assert_eq!((found, expected), (999, 1)),
        other => panic!("{other}"),
    }
}

#[test]
fn truncated_and_empty_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.gflow.ckpt");
    save_checkpoint(&path, &checkpoint()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
    assert!(matches!(load_checkpoint(&path).unwrap_err(), Error::Truncated { .. }));
    let mut extra = bytes.clone();
    extra.push(0);
    std::fs::write(&path, &extra).unwrap();
    assert!(matches!(load_checkpoint(&path).unwrap_err(), Error::Malformed { .. }));

    let pairs_path = dir.path().join("p.bin");
    save_pairs(&pairs_path, &pairs()).unwrap();
    let bytes = std::fs::read(&pairs_path).unwrap();
    std::fs::write(&pairs_path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(matches!(load_pairs(&pairs_path).unwrap_err(), Error::Truncated { .. }));

    let empty = dir.path().join("empty");
    std::fs::write(&empty, b"").unwrap();
    assert!(matches!(load_checkpoint(&empty).unwrap_err(), Error::EmptyFile(_)));
    assert!(matches!(load_pairs(&empty).unwrap_err(), Error::EmptyFile(_)));
    assert!(matches!(load_geometries(&empty).unwrap_err(), Error::EmptyFile(_)));
    assert!(matches!(load_checkpoint(dir.path().join("missing")).unwrap_err(), Error::Io { .. }));
}

#[test]
fn pairs_round_trip_keeps_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    let mut set = pairs();
    set.pairs[1] = set.pairs[1].clone().assume_aligned();
    save_pairs(&path, &set).unwrap();
    assert_eq!(load_pairs(&path).unwrap(), set);
}

#[test]
fn metrics_append_keeps_one_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    let row = RunMetrics {
        phase: "sample".into(),
        distribution_cost: 1.25,
        per_atom_cost: 0.2,
        mean_steps: 7.5,
        median_steps: 7.0,
        validity_rate: 0.5,
        wall_seconds: 0.1,
        seed: 4,
        config_hash: "abc".into(),
    };
    append_metrics(&path, std::slice::from_ref(&row)).unwrap();
    append_metrics(&path, std::slice::from_ref(&row)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some(METRICS_HEADER));
    assert_eq!(text.matches("phase").count(), 1);
    assert_eq!(load_metrics(&path).unwrap(), vec![row.clone(), row]);
}

#[test]
fn loss_curve_has_step_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loss.csv");
    save_loss_curve(&path, &[0.5, 0.25]).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "step,loss\n0,0.5\n1,0.25\n");
}

fn geometry_strategy() -> impl Strategy<Value = Geometry> {
    (1usize..6, 1usize..4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(prop::array::uniform3(-1e3f64..1e3), n),
            prop::collection::vec(prop::collection::vec(-1e3f64..1e3, d), n),
            prop::option::of("[a-z]{1,8}"),
        )
            .prop_map(|(x, h, tag)| Geometry::new(x, h, tag).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geometries_round_trip(data in prop::collection::vec(geometry_strategy(), 1..5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.geoms.jsonl");
        save_geometries(&path, &data).unwrap();
        prop_assert_eq!(load_geometries(&path).unwrap(), data);
    }

    #[test]
    fn latent_flat_round_trip(n in 1usize..6, k in 0usize..4, seed in any::<u64>()) {
        let z = sample_noise(n, k, seed);
        prop_assert_eq!(LatentGeometry::from_flat(&z.to_flat(), n, k).unwrap(), z);
    }
}
