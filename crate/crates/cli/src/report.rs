//! Metric JSON to CSV and plot data.
//!
//! Scalars anywhere in the document become `key,value` CSV rows with
//! dot-joined paths. Numeric arrays become series indexed from 0 and
//! arrays of `[x, y]` pairs become point series.

use serde::Serialize;
use serde_json::Value as Json;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PlotData {
    pub series: Vec<Series>,
}

fn as_pair(v: &Json) -> Option<(f64, f64)> {
    match v.as_array()?.as_slice() {
        [x, y] => Some((x.as_f64()?, y.as_f64()?)),
        _ => None,
    }
}

fn walk(path: &str, v: &Json, rows: &mut Vec<(String, String)>, plots: &mut Vec<Series>) {
    let key = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match v {
        Json::Object(map) => {
            for (k, child) in map {
                walk(&key(k), child, rows, plots);
            }
        }
        Json::Array(items) => {
            if !items.is_empty() && items.iter().all(Json::is_number) {
                let points = items.iter().enumerate().map(|(i, y)| (i as f64, y.as_f64().unwrap_or(f64::NAN))).collect();
                plots.push(Series {
                    name: path.to_string(),
                    points,
                });
            } else if let Some(points) = (!items.is_empty()).then(|| items.iter().map(as_pair).collect::<Option<Vec<_>>>()).flatten() {
                plots.push(Series {
                    name: path.to_string(),
                    points,
                });
            } else {
                for (i, child) in items.iter().enumerate() {
                    walk(&key(&i.to_string()), child, rows, plots);
                }
            }
        }
        Json::Null => rows.push((path.to_string(), String::new())),
        Json::String(s) => rows.push((path.to_string(), s.clone())),
        other => rows.push((path.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV text (with a `key,value` header) and plot series of a metric document.
pub fn render(doc: &Json) -> (String, PlotData) {
    let mut rows = Vec::new();
    let mut series = Vec::new();
    walk("", doc, &mut rows, &mut series);
    let mut csv = String::from("key,value\n");
    for (k, v) in rows {
        csv.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
    }
    (csv, PlotData { series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn scalars_and_series_are_split() {
        let doc = json!({
            "task": "app",
            "accuracy": 0.5,
            "loss_curve": [3.0, 2.0],
            "pr": {"text": [[0.0, 1.0], [1.0, 0.5]]},
            "empty": [],
        });
        let (csv, plot) = render(&doc);
        assert_eq!(csv, "key,value\naccuracy,0.5\ntask,app\n");
        assert_eq!(plot.series.len(), 2);
        assert_eq!(plot.series[0].name, "loss_curve");
        assert_eq!(plot.series[0].points, vec![(0.0, 3.0), (1.0, 2.0)]);
        assert_eq!(plot.series[1].name, "pr.text");
        assert_eq!(plot.series[1].points, vec![(0.0, 1.0), (1.0, 0.5)]);
    }

    #[test]
    fn fields_with_commas_are_quoted() {
        let (csv, _) = render(&json!({"a,b": "x\"y"}));
        assert_eq!(csv, "key,value\n\"a,b\",\"x\"\"y\"\n");
    }
}
