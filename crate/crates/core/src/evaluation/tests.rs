use super::*;
use crate::corpus::{correctness_histogram, AudioRef, Track};

fn rec(id: &str, system: &str, listener: &str, c: f64) -> UtteranceRecord {
    UtteranceRecord {
        utterance_id: id.into(),
        listener_id: listener.into(),
        system_id: system.into(),
        track: Track::Closed,
        enhanced_audio_ref: AudioRef(format!("{id}.wav")),
        hls_audio_ref: None,
        clean_audio_ref: None,
        correctness: c,
        audiograms: None,
    }
}

fn pred(id: &str, percent: f64) -> Prediction {
    Prediction::from_channels(id, percent / 100.0, None)
}

#[test]
fn perfect_predictor() {
    let records = vec![rec("a", "S1", "L1", 10.0), rec("b", "S1", "L2", 50.0), rec("c", "S2", "L1", 90.0)];
    let preds: Vec<_> = records.iter().map(|r| pred(&r.utterance_id, r.correctness)).collect();
    let m = score(&preds, &records).unwrap();
    assert!(m.rmse < 1e-12);
    assert!((m.spearman.unwrap() - 1.0).abs() < 1e-12);
    assert!((m.pearson.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(m.n, 3);
}

#[test]
fn swapped_pair_rmse_is_ten() {
    let records = vec![rec("a", "S", "L", 20.0), rec("b", "S", "L", 10.0)];
    let m = score(&[pred("a", 10.0), pred("b", 20.0)], &records).unwrap();
    assert!((m.rmse - 10.0).abs() < 1e-9);
    // Both squared errors equal 0.01 on the unit scale.
    assert!(m.error_var.abs() < 1e-15);
    let alt = score_with(&[pred("a", 10.0), pred("b", 20.0)], &records, "m", VarDefinition::ErrorPercent).unwrap();
    assert!((alt.error_var - 100.0).abs() < 1e-9);
}

#[test]
fn rmse_homogeneous_and_order_free() {
    let records: Vec<_> = (0..6).map(|i| rec(&format!("u{i}"), "S", "L", (i * 17 % 100) as f64)).collect();
    let preds: Vec<_> = (0..6).map(|i| pred(&format!("u{i}"), (i * 31 % 100) as f64)).collect();
    let m = score(&preds, &records).unwrap();
    let mut rev = preds.clone();
    rev.reverse();
    assert!((score(&rev, &records).unwrap().rmse - m.rmse).abs() < 1e-12);
    let unit = (preds
        .iter()
        .zip(&records)
        .map(|(p, r)| (p.i_hat - r.correctness / 100.0).powi(2))
        .sum::<f64>()
        / 6.0)
        .sqrt();
    assert!((m.rmse - 100.0 * unit).abs() < 1e-9);
}

#[test]
fn constant_predictions_flag_undefined_correlation() {
    let records = vec![rec("a", "S", "L", 20.0), rec("b", "S", "L", 60.0)];
    let m = score(&[pred("a", 50.0), pred("b", 50.0)], &records).unwrap();
    assert_eq!((m.spearman, m.pearson), (None, None));
    assert_eq!(m.notes.len(), 2);
    assert!(metrics_csv(&[m]).lines().nth(1).unwrap().contains("NaN,NaN"));
}

#[test]
fn unmatched_and_too_few_rejected() {
    let records = vec![rec("a", "S", "L", 20.0), rec("b", "S", "L", 60.0)];
    match score(&[pred("a", 1.0), pred("x", 2.0), pred("y", 3.0)], &records) {
        Err(Error::UnmatchedPredictions(ids)) => assert_eq!(ids, ["x", "y"]),
        other => panic!("{other:?}"),
    }
    assert!(score(&[pred("a", 1.0)], &records).is_err());
    assert!(score(&[pred("a", 1.0), pred("a", 2.0)], &records).is_err());
}

#[test]
fn system_breakdown_reproduces_means() {
    let records = vec![
        rec("a", "S1", "L1", 70.0),
        rec("b", "S1", "L2", 90.0),
        rec("c", "S2", "L1", 10.0),
        rec("d", "S2", "L2", 30.0),
    ];
    let preds: Vec<_> = records.iter().map(|r| pred(&r.utterance_id, r.correctness)).collect();
    let seen: BTreeSet<String> = ["S1".to_string()].into();
    let b = breakdown(&preds, &records, GroupKind::System, &seen).unwrap();
    assert_eq!(b.rows.len(), 2);
    assert_eq!((b.rows[0].group_id.as_str(), b.rows[0].mean_true), ("S1", 80.0));
    assert!((b.rows[0].mean_pred - 80.0).abs() < 1e-9);
    assert_eq!(b.rows[1].mean_true, 20.0);
    assert!(!b.rows[0].unseen && b.rows[1].unseen);

    let all = GroupKind::System.ids(&records);
    let b = breakdown(&preds, &records, GroupKind::System, &all).unwrap();
    assert!(b.rows.iter().all(|r| !r.unseen));
    assert_eq!(b.rows.iter().map(|r| r.n).sum::<usize>(), 4);

    let weighted: f64 = b.rows.iter().map(|r| r.mean_true * r.n as f64).sum::<f64>() / 4.0;
    assert!((weighted - 50.0).abs() < 1e-9);
}

#[test]
fn report_files() {
    let records = vec![rec("a", "S1", "L1", 70.0), rec("b", "S2", "L2", 20.0), rec("c", "S2", "L1", 40.0)];
    let preds = vec![pred("a", 60.0), pred("b", 30.0), pred("c", 35.0)];
    let m = score(&preds, &records).unwrap();
    let seen = GroupKind::System.ids(&records[..1]);
    let bs = vec![
        breakdown(&preds, &records, GroupKind::System, &seen).unwrap(),
        breakdown(&preds, &records, GroupKind::Listener, &GroupKind::Listener.ids(&records)).unwrap(),
    ];
    let h = correctness_histogram(&records, 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bundle = render_report(std::slice::from_ref(&m), &bs, Some(&h), dir.path()).unwrap();
    assert_eq!(bundle.charts.len(), 2);
    assert!(bundle.histogram.as_ref().unwrap().exists());
    let table = std::fs::read_to_string(&bundle.metrics_csv).unwrap();
    assert_eq!(table.lines().count(), 2);
    let svg = std::fs::read_to_string(&bundle.charts[0]).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains(r#"font-weight="bold">S2<"#));

    let first = std::fs::read(&bundle.metrics_csv).unwrap();
    render_report(&[m.clone()], &bs, Some(&h), dir.path()).unwrap();
    assert_eq!(first, std::fs::read(&bundle.metrics_csv).unwrap());

    let empty = tempfile::tempdir().unwrap();
    let b = render_report(&[m], &[], None, empty.path()).unwrap();
    assert!(b.charts.is_empty() && !b.warnings.is_empty());
    assert!(b.metrics_csv.exists());
}

#[test]
fn predictions_table_columns() {
    let records = vec![rec("a", "S", "L", 70.0)];
    let p = Prediction::from_channels("a", 0.25, Some(0.5));
    let csv = predictions_csv(&[p], &records).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "a,25.000000,50.000000,50.000000,70");
}
