use std::fs;

use ss2s::io::{self, load_recording_csv, read_assignments, Sidecar};
use ss2s::model_file::{SavedModel, MAGIC};
use ss2s_core::pairs::{Pair, PairSet};
use ss2s_core::timeseries::Scaler;
use ss2s_core::{EncoderDecoder, Matrix, MetricHead, MetricKind, PairLabel, Recording, SequenceSample};

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

#[test]
fn recording_csv_reads_rows_in_order() {
    let dir = tmp();
    let p = dir.path().join("r.csv");
    let mut text = String::from("ch0,ch1,ch2\n");
    for t in 0..10 {
        text += &format!("{t},{}.5,-{t}\n", t * 2);
    }
    fs::write(&p, text).unwrap();
    let rec = load_recording_csv(&p, 10.0).unwrap();
    assert_eq!(rec.channels(), 3);
    assert_eq!(rec.len(), 10);
    assert_eq!(rec.sample(3), &[3.0, 6.5, -3.0]);
    assert_eq!(rec.sample_rate(), 10.0);
}

#[test]
fn recording_csv_errors() {
    let dir = tmp();
    let p = dir.path().join("r.csv");

    fs::write(&p, "ch0,ch1\n").unwrap();
    let e = format!("{:#}", load_recording_csv(&p, 1.0).unwrap_err());
    assert!(e.contains("no samples"), "{e}");

    fs::write(&p, "ch0,ch1\n1,2\n3,NaN\n5,6\n").unwrap();
    let e = format!("{:#}", load_recording_csv(&p, 1.0).unwrap_err());
    assert!(e.contains("row 3"), "{e}");

    fs::write(&p, "ch0,ch1\n1,2\n3,x\n").unwrap();
    let e = format!("{:#}", load_recording_csv(&p, 1.0).unwrap_err());
    assert!(e.contains("row 3"), "{e}");

    fs::write(&p, "ch0,ch1\n1,2\n3\n").unwrap();
    assert!(load_recording_csv(&p, 1.0).is_err());

    assert!(load_recording_csv(&dir.path().join("missing.csv"), 1.0).is_err());
}

#[test]
fn recording_csv_round_trips_exactly() {
    let dir = tmp();
    let p = dir.path().join("r.csv");
    let values: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
    let rec = Recording::new(3, 2.5, values).unwrap();
    io::write_atomic(&p, &io::recording_csv(&rec).unwrap()).unwrap();
    assert_eq!(load_recording_csv(&p, 2.5).unwrap(), rec);
}

#[test]
fn sidecar_day_ranges() {
    let dir = tmp();
    let p = dir.path().join("s.json");
    fs::write(&p, r#"{"sample_rate_hz": 10.0, "day_starts": [0, 100, 250]}"#).unwrap();
    let s = Sidecar::load(&p).unwrap();
    assert_eq!(s.day_ranges(300).unwrap(), vec![(0, 100), (100, 250), (250, 300)]);
    assert!(s.day_ranges(250).is_err());

    fs::write(&p, r#"{"sample_rate_hz": 10.0, "day_starts": [0], "extra": 1}"#).unwrap();
    assert!(Sidecar::load(&p).is_err());
    fs::write(&p, r#"{"sample_rate_hz": 10.0, "day_starts": [5, 5]}"#).unwrap();
    assert!(Sidecar::load(&p).is_err());
    fs::write(&p, r#"{"sample_rate_hz": 0.0, "day_starts": [0]}"#).unwrap();
    assert!(Sidecar::load(&p).is_err());
}

#[test]
fn export_csv_headers() {
    let pairs = PairSet {
        pairs: vec![
            Pair {
                a: 0,
                b: 3,
                label: PairLabel::Similar,
            },
            Pair {
                a: 1,
                b: 2,
                label: PairLabel::Dissimilar,
            },
        ],
        seed: 0,
    };
    let text = String::from_utf8(io::pairs_csv(&pairs).unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index_a,index_b,label"));
    assert_eq!(lines.next().unwrap().split(',').take(2).collect::<Vec<_>>(), ["0", "3"]);

    let seqs: Vec<SequenceSample> = (0..3)
        .map(|i| SequenceSample::new(i / 2, i % 2, 2, 1, vec![0.0, 1.0]).unwrap())
        .collect();
    let text = String::from_utf8(io::assignments_csv(&seqs, &[4, 0, 4]).unwrap()).unwrap();
    assert_eq!(text, "sequence_index,day,slot,cluster\n0,0,0,4\n1,0,1,0\n2,1,0,4\n");
    assert!(io::assignments_csv(&seqs, &[0]).is_err());

    let dir = tmp();
    let p = dir.path().join("a.csv");
    io::write_atomic(&p, text.as_bytes()).unwrap();
    let back = read_assignments(&p).unwrap();
    assert_eq!(back.len(), 3);
    assert_eq!((back[2].day, back[2].slot, back[2].cluster), (1, 0, 4));

    let m = Matrix::from_rows(&[&[0.0, 1.5], &[1.5, 0.0]]).unwrap();
    assert_eq!(
        String::from_utf8(io::matrix_csv(&m).unwrap()).unwrap(),
        "0,1.5\n1.5,0\n"
    );
}

#[test]
fn atomic_write_leaves_no_temporaries() {
    let dir = tmp();
    let p = dir.path().join("nested/out.txt");
    io::write_atomic(&p, b"one").unwrap();
    io::write_atomic(&p, b"two").unwrap();
    assert_eq!(fs::read(&p).unwrap(), b"two");
    let names: Vec<_> = fs::read_dir(p.parent().unwrap())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 1);
}

fn saved(kind: MetricKind) -> SavedModel {
    let mut rng = ss2s_core::seeded_rng(11);
    let model = EncoderDecoder::new(3, 6, &mut rng);
    let head = MetricHead::for_kind(kind, 6, 4, None, &mut rng).unwrap();
    SavedModel {
        model,
        head,
        scaler: Some(Scaler {
            min: vec![-1.0, 0.0, 2.0],
            max: vec![1.0, 0.5, 3.0],
        }),
        seed: 99,
    }
}

#[test]
fn model_file_round_trips_every_head() {
    for kind in [MetricKind::Euclidean, MetricKind::Cosine, MetricKind::Kissme] {
        let s = saved(kind);
        let bytes = s.to_bytes().unwrap();
        assert_eq!(&bytes[..5], MAGIC);
        let back = SavedModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}

#[test]
fn model_file_layout() {
    let s = saved(MetricKind::Kissme);
    let bytes = s.to_bytes().unwrap();
    let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[9..9 + len]).unwrap();
    assert_eq!(header["channels"], 3);
    assert_eq!(header["hidden"], 6);
    assert_eq!(header["metric"], "kissme");
    assert_eq!(header["proj_dim"], 4);
    assert_eq!(header["seed"], 99);
    let body = &bytes[9 + len..];
    assert_eq!(body.len(), 8 * (s.model.param_count() + 6 * 4 + 4 * 4));
    let first = f64::from_le_bytes(body[..8].try_into().unwrap());
    assert_eq!(first, s.model.params()[0]);
    let w0 = 8 * s.model.param_count();
    let w = f64::from_le_bytes(body[w0..w0 + 8].try_into().unwrap());
    assert_eq!(w, s.head.projection().unwrap().as_slice()[0]);
}

#[test]
fn model_file_rejects_damage() {
    let bytes = saved(MetricKind::Kissme).to_bytes().unwrap();
    assert!(SavedModel::from_bytes(&bytes[..bytes.len() - 8]).is_err());
    assert!(SavedModel::from_bytes(b"SS2S2xxxx").is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(SavedModel::from_bytes(&bad).is_err());

    let dir = tmp();
    let p = dir.path().join("m.ss2s");
    let s = saved(MetricKind::Cosine);
    s.save(&p).unwrap();
    assert_eq!(SavedModel::load(&p).unwrap(), s);
}
