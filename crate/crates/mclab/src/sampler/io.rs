//! Pinned JSON shapes for circuits and seeded samplers.
//!
//! Circuit: `{"qubits": 2, "gates": [["h",[0]], ["cnot",[0,1]], ["rz",[1],0.9]],
//! "measured": [0,1]}`. Gate names are lowercase; `rz` carries its angle as a
//! third element. Seeded sampler: `{"seed_len": t, "n": n, "map": {...}}` where
//! the map is `{"name": "identity" | "prefix_parity" | "repeat_truncate" |
//! "and_pairs"}`, `{"name": "constant", "value": "0110"}`, or
//! `{"name": "truth_table", "table": [..]}`.

use super::{Gate, QuantumCircuit, SamplerError, SeedMap, SeededSampler};
use serde_json::{json, Value};

pub fn circuit_to_json(c: &QuantumCircuit) -> String {
    let gates: Vec<Value> = c
        .gates
        .iter()
        .map(|g| match *g {
            Gate::H(q) => json!(["h", [q]]),
            Gate::X(q) => json!(["x", [q]]),
            Gate::T(q) => json!(["t", [q]]),
            Gate::Cnot { control, target } => json!(["cnot", [control, target]]),
            Gate::Cz(a, b) => json!(["cz", [a, b]]),
            Gate::Rz { target, angle } => json!(["rz", [target], angle]),
        })
        .collect();
    serde_json::to_string_pretty(&json!({
        "qubits": c.qubits,
        "gates": gates,
        "measured": c.measured,
    }))
    .expect("circuit json never fails to serialize")
}

fn parse_err(why: &str) -> SamplerError {
    SamplerError::Parse(why.to_string())
}

fn as_u32(v: &Value, what: &str) -> Result<u32, SamplerError> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .ok_or_else(|| parse_err(&format!("{what} is not a small integer")))
}

fn u32_list(v: &Value, what: &str) -> Result<Vec<u32>, SamplerError> {
    v.as_array()
        .ok_or_else(|| parse_err(&format!("{what} is not an array")))?
        .iter()
        .map(|x| as_u32(x, what))
        .collect()
}

pub fn circuit_from_json(text: &str) -> Result<QuantumCircuit, SamplerError> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(&e.to_string()))?;
    let qubits = as_u32(v.get("qubits").ok_or_else(|| parse_err("missing qubits"))?, "qubits")?;
    let measured = u32_list(
        v.get("measured").ok_or_else(|| parse_err("missing measured"))?,
        "measured",
    )?;
    let raw_gates = v
        .get("gates")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing gates array"))?;
    let mut gates = Vec::with_capacity(raw_gates.len());
    for g in raw_gates {
        let parts = g.as_array().ok_or_else(|| parse_err("gate is not an array"))?;
        if parts.len() < 2 {
            return Err(parse_err("gate needs a name and a target list"));
        }
        let name = parts[0].as_str().ok_or_else(|| parse_err("gate name"))?;
        let targets = u32_list(&parts[1], "gate targets")?;
        let arity = |k: usize| -> Result<(), SamplerError> {
            if targets.len() == k && (parts.len() == 2 || name == "rz") {
                Ok(())
            } else {
                Err(parse_err(&format!("{name} expects {k} target(s)")))
            }
        };
        gates.push(match name {
            "h" => {
                arity(1)?;
                Gate::H(targets[0])
            }
            "x" => {
                arity(1)?;
                Gate::X(targets[0])
            }
            "t" => {
                arity(1)?;
                Gate::T(targets[0])
            }
            "cnot" => {
                arity(2)?;
                Gate::Cnot { control: targets[0], target: targets[1] }
            }
            "cz" => {
                arity(2)?;
                Gate::Cz(targets[0], targets[1])
            }
            "rz" => {
                arity(1)?;
                let angle = parts
                    .get(2)
                    .and_then(Value::as_f64)
                    .ok_or_else(|| parse_err("rz needs an angle"))?;
                Gate::Rz { target: targets[0], angle }
            }
            other => return Err(parse_err(&format!("unknown gate {other}"))),
        });
    }
    let circuit = QuantumCircuit { qubits, gates, measured };
    circuit.validate()?;
    Ok(circuit)
}

pub fn seeded_to_json(s: &SeededSampler) -> String {
    let map = match s.map() {
        SeedMap::Identity => json!({"name": "identity"}),
        SeedMap::Constant(z) => json!({"name": "constant", "value": z.to_string()}),
        SeedMap::PrefixParity => json!({"name": "prefix_parity"}),
        SeedMap::RepeatTruncate => json!({"name": "repeat_truncate"}),
        SeedMap::AndPairs => json!({"name": "and_pairs"}),
        SeedMap::TruthTable(t) => json!({"name": "truth_table", "table": t}),
    };
    serde_json::to_string_pretty(&json!({
        "seed_len": s.seed_len(),
        "n": s.n,
        "map": map,
    }))
    .expect("seeded sampler json never fails to serialize")
}

pub fn seeded_from_json(text: &str) -> Result<SeededSampler, SamplerError> {
    let v: Value = serde_json::from_str(text).map_err(|e| parse_err(&e.to_string()))?;
    let seed_len = as_u32(v.get("seed_len").ok_or_else(|| parse_err("missing seed_len"))?, "seed_len")?;
    let n = as_u32(v.get("n").ok_or_else(|| parse_err("missing n"))?, "n")?;
    let m = v.get("map").ok_or_else(|| parse_err("missing map"))?;
    let name = m
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err("map has no name"))?;
    let map = match name {
        "identity" => SeedMap::Identity,
        "prefix_parity" => SeedMap::PrefixParity,
        "repeat_truncate" => SeedMap::RepeatTruncate,
        "and_pairs" => SeedMap::AndPairs,
        "constant" => {
            let z = m
                .get("value")
                .and_then(Value::as_str)
                .ok_or_else(|| parse_err("constant map needs a value"))?;
            SeedMap::Constant(z.parse().map_err(|e| parse_err(&format!("{e}")))?)
        }
        "truth_table" => {
            let table = u32_list(
                m.get("table").ok_or_else(|| parse_err("truth_table needs a table"))?,
                "table",
            )?;
            SeedMap::TruthTable(table)
        }
        other => return Err(parse_err(&format!("unknown map {other}"))),
    };
    SeededSampler::new(seed_len, n, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circuit_roundtrip_is_identity() {
        let c = QuantumCircuit {
            qubits: 3,
            gates: vec![
                Gate::H(0),
                Gate::Cnot { control: 0, target: 1 },
                Gate::Rz { target: 2, angle: 0.75 },
                Gate::Cz(0, 2),
            ],
            measured: vec![2, 0],
        };
        let text = circuit_to_json(&c);
        assert_eq!(circuit_from_json(&text).unwrap(), c);
        assert!(text.contains("\"rz\""));
    }

    #[test]
    fn malformed_circuits_are_rejected() {
        assert!(circuit_from_json("{}").is_err());
        assert!(circuit_from_json(r#"{"qubits":1,"gates":[["zz",[0]]],"measured":[0]}"#).is_err());
        assert!(circuit_from_json(r#"{"qubits":1,"gates":[["rz",[0]]],"measured":[0]}"#).is_err());
        assert!(circuit_from_json(r#"{"qubits":1,"gates":[["h",[0,1]]],"measured":[0]}"#).is_err());
    }

    #[test]
    fn seeded_roundtrip_covers_every_map() {
        let samplers = [
            SeededSampler::new(4, 4, SeedMap::Identity).unwrap(),
            SeededSampler::new(3, 2, SeedMap::Constant("01".parse().unwrap())).unwrap(),
            SeededSampler::new(8, 4, SeedMap::PrefixParity).unwrap(),
            SeededSampler::new(6, 9, SeedMap::RepeatTruncate).unwrap(),
            SeededSampler::new(12, 6, SeedMap::AndPairs).unwrap(),
            SeededSampler::new(2, 2, SeedMap::TruthTable(vec![3, 0, 1, 3])).unwrap(),
        ];
        for s in samplers {
            let text = seeded_to_json(&s);
            assert_eq!(seeded_from_json(&text).unwrap(), s);
        }
    }
}
