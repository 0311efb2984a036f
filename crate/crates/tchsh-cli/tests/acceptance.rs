//! End-to-end acceptance for the classification command, through the real
//! binary: correct verdicts for the damping channel at v = 0.6 and v = 0.9
//! within the matched filter family, inside the runtime budget.

use std::io::Write;
use std::process::Command;
use std::time::Instant;

fn write_damping_channel(path: &std::path::Path, v: f64) {
    let s = (1.0 - v).sqrt();
    let doc = serde_json::json!({
        "dim": 2,
        "kind": "tp",
        "kraus": [
            [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [s, 0.0]],
            [[0.0, 0.0], [v.sqrt(), 0.0], [0.0, 0.0], [0.0, 0.0]],
        ],
    });
    let mut f = std::fs::File::create(path).unwrap();
    writeln!(f, "{doc}").unwrap();
}

fn classify(path: &std::path::Path) -> serde_json::Value {
    let out = Command::new(env!("CARGO_BIN_EXE_tchsh"))
        .args(["classify", "--resolution", "21", "--channel"])
        .arg(path)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("classification emits JSON")
}

#[test]
fn criterion_08_classification_end_to_end() {
    let dir = std::env::temp_dir().join(format!("tchsh-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let started = Instant::now();

    let result = (|| -> Result<String, String> {
        let path06 = dir.join("ad06.json");
        write_damping_channel(&path06, 0.6);
        let doc = classify(&path06);
        if doc["activation"]["activated"] != serde_json::Value::Bool(true) {
            return Err(format!("v=0.6: activated = {}", doc["activation"]["activated"]));
        }
        if doc["nonlocality"]["strongly_breaking_candidate"] != serde_json::Value::Bool(false) {
            return Err(format!(
                "v=0.6: strongly_breaking_candidate = {}",
                doc["nonlocality"]["strongly_breaking_candidate"]
            ));
        }

        let path09 = dir.join("ad09.json");
        write_damping_channel(&path09, 0.9);
        let doc = classify(&path09);
        if doc["activation"]["activated"] != serde_json::Value::Bool(false) {
            return Err(format!("v=0.9: activated = {}", doc["activation"]["activated"]));
        }
        // The matched family tops out at 4 sqrt2 sqrt(0.1)/1.1 ~ 1.626 < 2.
        let best = doc["activation"]["best"].as_f64().unwrap();
        let bound = 4.0 * std::f64::consts::SQRT_2 * 0.1_f64.sqrt() / 1.1;
        if (best - bound).abs() > 1e-3 {
            return Err(format!("v=0.9: best {best} not at the family bound {bound}"));
        }

        let elapsed = started.elapsed();
        if elapsed.as_secs_f64() > 10.0 {
            return Err(format!("runtime {elapsed:?} exceeds 10 s"));
        }
        Ok(format!("both verdicts correct in {elapsed:.2?}"))
    })();

    let _ = std::fs::remove_dir_all(&dir);
    match result {
        Ok(detail) => println!("[PASS] criterion 8: classification end-to-end ({detail})"),
        Err(msg) => {
            println!("[FAIL] criterion 8: classification end-to-end ({msg})");
            panic!("criterion 8 failed: {msg}");
        }
    }
}
