use std::collections::BTreeMap;

use rqi_core::analysis::{discard_sweep, emit_sweep_artifacts, random_discard_control, DEFAULT_FRACTIONS};
use rqi_core::metrics::DirectionMap;
use rqi_core::table::{MetricScoreTable, ScoreRow};

fn table() -> MetricScoreTable {
    let mut rows = Vec::new();
    let mut gt = BTreeMap::new();
    for c in 0..12 {
        let id = format!("c{c:02}");
        gt.insert(id.clone(), ((c * 5) % 12) as f64);
        for (m, model) in ["a<&>", "b\"q'"].into_iter().enumerate() {
            rows.push(ScoreRow::new(&id, model, "psnr", 20.0 + c as f64 * 0.5 + m as f64));
            rows.push(ScoreRow::new(&id, model, "niqe", 5.0 - c as f64 * 0.1 + m as f64 * 0.3));
        }
    }
    MetricScoreTable::new(rows).with_gt_quality(gt)
}

#[test]
fn svg_output_parses_as_xml_with_one_line_per_model() {
    let t = table();
    let d = DirectionMap::default();
    let sweep = discard_sweep(&t, &DEFAULT_FRACTIONS, &d).unwrap();
    let control = random_discard_control(&t, &DEFAULT_FRACTIONS, 10, 3, &d).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    emit_sweep_artifacts(&sweep, &control, tmp.path()).unwrap();
    for metric in ["psnr", "niqe"] {
        let text = std::fs::read_to_string(tmp.path().join(format!("sweep_{metric}.svg"))).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{metric}: {e}"));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(lines, 2, "{metric}");
        let labels: Vec<&str> = doc.descendants().filter(|n| n.has_tag_name("text")).filter_map(|n| n.text()).collect();
        assert!(labels.contains(&"a<&>") && labels.contains(&"b\"q'"), "{labels:?}");
    }
}
