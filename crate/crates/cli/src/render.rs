//! Human-readable views of API documents. Pure formatting.

use serde_json::Value;

/// Left-aligned columns separated by two spaces. No trailing whitespace.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            if i + 1 < cells.len() {
                out.push_str(&" ".repeat(w - cell.chars().count()));
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

fn s(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn joined(v: &Value, sep: &str) -> String {
    match v.as_array() {
        Some(items) if !items.is_empty() => items.iter().map(s).collect::<Vec<_>>().join(sep),
        _ => "-".into(),
    }
}

fn encryption(intent: &Value) -> String {
    let enc = &intent["encryption"];
    if enc["required"].as_bool().unwrap_or(false) {
        s(&enc["compliance"])
    } else {
        "none".into()
    }
}

fn last_reason(intent: &Value) -> String {
    intent["stateHistory"]
        .as_array()
        .and_then(|h| h.last())
        .map(|c| s(&c["reason"]))
        .unwrap_or_default()
}

pub fn intents(list: &Value) -> String {
    let rows: Vec<Vec<String>> = list
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .map(|i| {
            vec![
                s(&i["id"]),
                s(&i["state"]),
                s(&i["src"]),
                s(&i["dst"]),
                s(&i["bandwidthMbps"]),
                encryption(i),
                last_reason(i),
            ]
        })
        .collect();
    table(&["ID", "STATE", "SRC", "DST", "MBPS", "ENCRYPTION", "LAST REASON"], &rows)
}

pub fn intent(i: &Value) -> String {
    let mut out = format!(
        "{}  {}  {} -> {}  {} Mbps  encryption {}\n\n",
        s(&i["id"]),
        s(&i["state"]),
        s(&i["src"]),
        s(&i["dst"]),
        s(&i["bandwidthMbps"]),
        encryption(i)
    );
    let rows: Vec<Vec<String>> = i["stateHistory"]
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .map(|c| vec![s(&c["sequence"]), s(&c["state"]), s(&c["reason"])])
        .collect();
    out.push_str(&table(&["SEQ", "STATE", "REASON"], &rows));
    out
}

pub fn explain(report: &Value) -> String {
    let rows: Vec<Vec<String>> = report["candidates"]
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .enumerate()
        .map(|(n, c)| {
            vec![
                (n + 1).to_string(),
                s(&c["layer"]),
                s(&c["mechanism"]),
                format!("{} -> {}", s(&c["srcTransponder"]), s(&c["dstTransponder"])),
                joined(&c["path"], ","),
                s(&c["lambda"]),
                format!("{:.3}", c["totalLatencyMs"].as_f64().unwrap_or(0.0)),
                if c["feasible"].as_bool().unwrap_or(false) { "yes" } else { "no" }.into(),
                c["reason"].as_str().unwrap_or("").to_string(),
            ]
        })
        .collect();
    let mut out = table(
        &["#", "LAYER", "MECHANISM", "TRANSPONDERS", "PATH", "LAMBDA", "LATENCY MS", "FEASIBLE", "REASON"],
        &rows,
    );
    if let Some(notice) = report["notice"].as_str() {
        out.push_str(&format!("notice: {notice}\n"));
    }
    out
}

pub fn topology(doc: &Value) -> String {
    let mut out = format!("revision {}\n\n", s(&doc["revision"]));
    let empty = Vec::new();
    let nodes: Vec<Vec<String>> = doc["nodes"]
        .as_array()
        .unwrap_or(&empty)
        .iter()
        .map(|n| {
            let caps: Vec<String> = n["capabilities"]
                .as_array()
                .unwrap_or(&empty)
                .iter()
                .map(|c| format!("{}/{}", s(&c["mechanism"]), s(&c["keyLengthBits"])))
                .collect();
            vec![
                s(&n["id"]),
                s(&n["kind"]),
                s(&n["siteId"]),
                if caps.is_empty() { "-".into() } else { caps.join(",") },
            ]
        })
        .collect();
    out.push_str(&table(&["NODE", "KIND", "SITE", "ENCRYPTION"], &nodes));
    out.push('\n');
    let links: Vec<Vec<String>> = doc["links"]
        .as_array()
        .unwrap_or(&empty)
        .iter()
        .map(|l| {
            let lambdas = match l["lambdaOccupancy"].as_object() {
                Some(m) if !m.is_empty() => m.iter().map(|(k, v)| format!("{k}:{}", s(v))).collect::<Vec<_>>().join(","),
                _ => "-".into(),
            };
            vec![
                s(&l["id"]),
                s(&l["kind"]),
                format!("{} - {}", s(&l["aNode"]), s(&l["bNode"])),
                s(&l["state"]),
                lambdas,
            ]
        })
        .collect();
    out.push_str(&table(&["LINK", "KIND", "ENDS", "STATE", "WAVELENGTHS"], &links));
    out
}

pub fn trace(t: &Value) -> String {
    let rows: Vec<Vec<String>> = t["hops"]
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .enumerate()
        .map(|(n, h)| {
            vec![
                (n + 1).to_string(),
                s(&h["deviceId"]),
                s(&h["linkId"]),
                h["encryptedBy"].as_str().unwrap_or("NONE").to_string(),
            ]
        })
        .collect();
    let mut out = format!("{} -> {}  service {}\n\n", s(&t["src"]), s(&t["dst"]), s(&t["serviceId"]));
    out.push_str(&table(&["HOP", "DEVICE", "LINK", "ENCRYPTED BY"], &rows));
    let reached = t["reachedDestination"].as_bool().unwrap_or(false);
    out.push_str(&format!("reached destination: {}\n", if reached { "yes" } else { "no" }));
    let uncovered = match t["uncoveredLinks"].as_array() {
        Some(l) if !l.is_empty() => joined(&t["uncoveredLinks"], ", "),
        _ => "none".into(),
    };
    out.push_str(&format!("uncovered links: {uncovered}\n"));
    out
}

pub fn event_results(r: &Value) -> String {
    let rows: Vec<Vec<String>> = r["results"]
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .map(|x| vec![s(&x["intentId"]), s(&x["state"])])
        .collect();
    let mut out = format!("topology revision {}\n", s(&r["revision"]));
    if rows.is_empty() {
        out.push_str("no intents recompiled\n");
    } else {
        out.push_str(&table(&["RECOMPILED", "STATE"], &rows));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn table_pads_all_but_last_column() {
        let t = table(&["A", "BB"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "A    BB\nxyz  1\n");
    }

    #[test]
    fn empty_status_is_a_header() {
        assert_eq!(intents(&json!([])), "ID  STATE  SRC  DST  MBPS  ENCRYPTION  LAST REASON\n");
    }

    #[test]
    fn trace_ends_with_coverage_line() {
        let t = json!({"src": "A1", "dst": "B1", "serviceId": "intent-000001",
            "hops": [{"deviceId": "T1", "linkId": "FIBER-R1-R2", "encryptedBy": "OTN_AES"}],
            "reachedDestination": true, "uncoveredLinks": []});
        assert!(trace(&t).ends_with("uncovered links: none\n"));
        let t = json!({"src": "A1", "dst": "B1", "hops": [], "reachedDestination": false,
            "uncoveredLinks": ["X", "Y"]});
        assert!(trace(&t).ends_with("uncovered links: X, Y\n"));
    }
}
