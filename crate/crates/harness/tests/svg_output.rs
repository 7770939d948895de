use tddlab_core::learners::Algorithm;
use tddlab_core::metrics::{SweepRow, SweepTable, Window, DIVERGENCE_SENTINEL};
use tddlab_harness::output::Curve;
use tddlab_harness::svg::{curve_axes, curve_series, render_svg, sensitivity_axes, sensitivity_series};

fn row(algorithm: Algorithm, alpha: f64, zeta: f64, criterion: f64) -> SweepRow {
    SweepRow {
        task: "random_walk_10_tabular".into(),
        algorithm,
        alpha,
        kappa: 0.0,
        zeta,
        seed_count: 50,
        criterion,
        criterion_stderr: 0.01,
        window: Window::Final100,
    }
}

fn table() -> SweepTable {
    let exps = [-3.0, -2.0, -1.0, 0.0];
    let mut rows = Vec::new();
    for (i, e) in exps.iter().enumerate() {
        let alpha = 10f64.powf(*e);
        rows.push(row(Algorithm::Td, alpha, 1.0, 0.3 - 0.05 * i as f64));
        rows.push(row(Algorithm::Gtd2, alpha, 0.25, 0.4 - 0.05 * i as f64));
        rows.push(row(Algorithm::Gtd2, alpha, 1.0, 0.35 - 0.05 * i as f64));
    }
    rows.push(row(Algorithm::GradientDd, 1.0, 1.0, DIVERGENCE_SENTINEL));
    rows.push(row(Algorithm::GradientDd, 0.1, 1.0, 0.2));
    SweepTable { rows }
}

fn parse(svg: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(svg).expect("well-formed SVG")
}

fn polyline_points(doc: &roxmltree::Document<'_>) -> Vec<Vec<(f64, f64)>> {
    doc.descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .map(|n| {
            n.attribute("points")
                .unwrap()
                .split(' ')
                .map(|p| {
                    let (x, y) = p.split_once(',').unwrap();
                    (x.parse().unwrap(), y.parse().unwrap())
                })
                .collect()
        })
        .collect()
}

#[test]
fn sensitivity_chart_is_well_formed() {
    let t = table();
    let series = sensitivity_series(&t, Window::Final100);
    assert_eq!(series.len(), 3);
    // GTD2 keeps the best ζ at each α.
    let want: Vec<f64> = (0..4).map(|i| 0.35 - 0.05 * i as f64).collect();
    assert_eq!(series[1].y, want);
    let svg = render_svg(&series, &sensitivity_axes(&t, Window::Final100)).unwrap();
    let doc = parse(&svg);
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let labels: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("series"))
        .map(|n| n.attribute("data-label").unwrap())
        .collect();
    assert_eq!(labels, ["TD", "GTD2", "GradientDD"]);
    // The diverged cell is clamped to the top of the plot area, not off-canvas.
    for points in polyline_points(&doc) {
        assert!(points.iter().all(|&(x, y)| (0.0..=720.0).contains(&x) && (0.0..=440.0).contains(&y)));
    }
}

#[test]
fn log_ticks_sit_on_grid_values_evenly_spaced() {
    let t = table();
    let svg = render_svg(&sensitivity_series(&t, Window::Final100), &sensitivity_axes(&t, Window::Final100)).unwrap();
    let doc = parse(&svg);
    let ticks: Vec<(f64, f64)> = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("x-ticks"))
        .unwrap()
        .children()
        .filter(|n| n.has_tag_name("line"))
        .map(|n| {
            (
                n.attribute("data-value").unwrap().parse().unwrap(),
                n.attribute("x1").unwrap().parse().unwrap(),
            )
        })
        .collect();
    let values: Vec<f64> = ticks.iter().map(|t| t.0).collect();
    let want: Vec<f64> = [-3.0, -2.0, -1.0, 0.0].iter().map(|e| 10f64.powf(*e)).collect();
    assert_eq!(values, want);
    let gaps: Vec<f64> = ticks.windows(2).map(|w| w[1].1 - w[0].1).collect();
    assert!(gaps.iter().all(|g| *g > 0.0 && (g - gaps[0]).abs() < 0.02), "{gaps:?}");
    let labels: Vec<String> = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("x-ticks"))
        .unwrap()
        .children()
        .filter(|n| n.has_tag_name("text"))
        .map(|n| n.text().unwrap().to_string())
        .collect();
    assert_eq!(labels, ["-3", "-2", "-1", "0"]);
}

#[test]
fn flat_curve_draws_horizontal_line() {
    let curve = Curve {
        label: "TD".into(),
        mean: vec![0.25; 500],
        stderr: vec![0.0; 500],
    };
    let svg = render_svg(&curve_series(&[curve]), &curve_axes("flat")).unwrap();
    let doc = parse(&svg);
    let lines = polyline_points(&doc);
    assert_eq!(lines.len(), 1);
    let ys: Vec<f64> = lines[0].iter().map(|p| p.1).collect();
    assert!(ys.iter().all(|y| *y == ys[0]));
    assert!(lines[0].windows(2).all(|w| w[1].0 > w[0].0));
    assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("errorbar")).count(), 0);
}

#[test]
fn long_curves_are_downsampled() {
    let curve = Curve {
        label: "GTD2".into(),
        mean: (0..20_000).map(|i| 1.0 / (1.0 + i as f64)).collect(),
        stderr: vec![0.001; 20_000],
    };
    let svg = render_svg(&curve_series(&[curve]), &curve_axes("long")).unwrap();
    let doc = parse(&svg);
    let points = &polyline_points(&doc)[0];
    assert!(points.len() <= 801);
    let bars = doc.descendants().filter(|n| n.attribute("class") == Some("errorbar")).count();
    assert!((1..=21).contains(&bars));
}

#[test]
fn labels_are_escaped_and_empty_input_rejected() {
    let curve = Curve {
        label: "a<b&c".into(),
        mean: vec![1.0, 0.5],
        stderr: vec![0.1, 0.1],
    };
    let svg = render_svg(&curve_series(&[curve]), &curve_axes("x \"y\"")).unwrap();
    parse(&svg);
    assert!(svg.contains("a&lt;b&amp;c"));
    assert!(render_svg(&[], &curve_axes("none")).is_err());
}
