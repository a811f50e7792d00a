//! Emulated DNN workloads over a shared L2 and per-core L1 memories.
//!
//! Core `i` is master `i`; its L1 is the lower half of its own endpoint
//! region and L2 is the upper half of the L2 endpoint's region, so an L2
//! co-located with a core shares that endpoint. Every request issues at
//! cycle 0 and masters work through their lists in order.

use std::io::Read;

use super::trace::TraceRecord;
use super::TrafficSpec;
use crate::axi::Direction;
use crate::error::{ConfigError, Error};
use crate::topology::{allocate_address_map, Coord, NocConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub name: String,
    pub in_bytes: u64,
    pub out_bytes: u64,
    pub weight_bytes: u64,
}

/// Per-layer tensor sizes, from CSV with header
/// `layer,in_bytes,out_bytes,weight_bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerTable {
    pub layers: Vec<Layer>,
}

const RESNET34_SHRUNK: &str = include_str!("../../data/resnet34_shrink90.csv");
const VGG16_TILED: &str = include_str!("../../data/vgg16_tiled.csv");

impl LayerTable {
    pub fn from_csv(input: impl Read) -> Result<Self, Error> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["layer", "in_bytes", "out_bytes", "weight_bytes"] {
            return Err(ConfigError::invalid("layer_table", "header must be layer,in_bytes,out_bytes,weight_bytes").into());
        }
        let mut layers = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |k: usize| {
                rec[k].trim().parse::<u64>().map_err(|e| ConfigError::Syntax {
                    line: i + 2,
                    reason: format!("bad byte count `{}`: {e}", &rec[k]),
                })
            };
            layers.push(Layer {
                name: rec[0].to_string(),
                in_bytes: num(1)?,
                out_bytes: num(2)?,
                weight_bytes: num(3)?,
            });
        }
        if layers.is_empty() {
            return Err(ConfigError::invalid("layer_table", "no layers").into());
        }
        Ok(LayerTable { layers })
    }

    /// ResNet-34 with channel counts shrunk by 90%, 224x224 input, int8.
    pub fn resnet34_shrunk() -> Self {
        Self::from_csv(RESNET34_SHRUNK.as_bytes()).expect("bundled table parses")
    }

    /// VGG-16 on a 32x32 input, int8, one row per layer. Pooling is fused
    /// into the consuming layer, so `in_bytes` equals the previous row's
    /// `out_bytes`.
    pub fn vgg16_tiled() -> Self {
        Self::from_csv(VGG16_TILED.as_bytes()).expect("bundled table parses")
    }
}

struct Memories {
    cores: Vec<Coord>,
    l1: Vec<u64>,
    l2: u64,
}

fn memories(spec: &TrafficSpec, config: &NocConfig) -> Result<Memories, ConfigError> {
    spec.validate(config)?;
    let map = allocate_address_map(config)?;
    let base = |c: Coord, field: &str| {
        map.region_of(c)
            .map(|r| (r.base, r.size))
            .ok_or_else(|| ConfigError::invalid(field, format!("{c} is not a slave endpoint")))
    };
    let cores = config.masters.clone();
    if cores.len() < 2 {
        return Err(ConfigError::invalid("noc.masters", "DNN workloads need at least two cores"));
    }
    let l1 = cores
        .iter()
        .map(|&c| base(c, "noc.slaves").map(|(b, _)| b))
        .collect::<Result<_, _>>()?;
    let (b, size) = base(spec.l2, "traffic.l2")?;
    Ok(Memories {
        cores,
        l1,
        l2: b + size / 2,
    })
}

fn push(out: &mut Vec<TraceRecord>, cores: &[Coord], core: usize, direction: Direction, address: u64, bytes: u64) {
    if bytes > 0 {
        out.push(TraceRecord {
            issue_cycle: 0,
            master: cores[core],
            direction,
            address,
            bytes,
            id: core as u32,
        });
    }
}

fn check_fits(table: &LayerTable, config: &NocConfig, bytes: impl Fn(&Layer) -> u64) -> Result<(), ConfigError> {
    let half = config.endpoint_region_bytes / 2;
    match table.layers.iter().find(|l| bytes(l) > half) {
        Some(l) => Err(ConfigError::invalid("layer_table", format!("layer {} does not fit in half an endpoint region", l.name))),
        None => Ok(()),
    }
}

/// Data-parallel training: per layer and core, a weight fetch from L2, an
/// activation write-back to L2 and, when enabled, a gradient write to the
/// next core on the ring.
pub fn gen_dnn_training(spec: &TrafficSpec, config: &NocConfig, table: &LayerTable) -> Result<Vec<TraceRecord>, ConfigError> {
    let mem = memories(spec, config)?;
    check_fits(table, config, |l| l.out_bytes.max(l.weight_bytes))?;
    let n = mem.cores.len();
    let mut out = Vec::new();
    for layer in &table.layers {
        for i in 0..n {
            push(&mut out, &mem.cores, i, Direction::Read, mem.l2, layer.weight_bytes);
            push(&mut out, &mem.cores, i, Direction::Write, mem.l2, layer.out_bytes);
            if spec.gradient_exchange {
                push(&mut out, &mem.cores, i, Direction::Write, mem.l1[(i + 1) % n], layer.weight_bytes);
            }
        }
    }
    Ok(out)
}

/// Layers tiled across all cores: each core reads its input tile from L2
/// and writes its output tile back.
pub fn gen_dnn_parallel_conv(spec: &TrafficSpec, config: &NocConfig, table: &LayerTable) -> Result<Vec<TraceRecord>, ConfigError> {
    let mem = memories(spec, config)?;
    check_fits(table, config, |l| l.in_bytes.max(l.out_bytes))?;
    let n = mem.cores.len() as u64;
    let mut out = Vec::new();
    for layer in &table.layers {
        for i in 0..mem.cores.len() {
            push(&mut out, &mem.cores, i, Direction::Read, mem.l2, layer.in_bytes.div_ceil(n));
            push(&mut out, &mem.cores, i, Direction::Write, mem.l2, layer.out_bytes.div_ceil(n));
        }
    }
    Ok(out)
}

/// Layer `i` runs on core `i`: core 0 reads the network input from L2, each
/// core writes its output activations to the next core, and the last core
/// writes the result to L2.
pub fn gen_dnn_pipelined_conv(spec: &TrafficSpec, config: &NocConfig, table: &LayerTable) -> Result<Vec<TraceRecord>, ConfigError> {
    let mem = memories(spec, config)?;
    let n = mem.cores.len();
    if table.layers.len() < n {
        return Err(ConfigError::invalid(
            "layer_table",
            format!("{} layers cannot fill a {n}-core pipeline", table.layers.len()),
        ));
    }
    check_fits(table, config, |l| l.in_bytes.max(l.out_bytes))?;
    let mut out = Vec::new();
    push(&mut out, &mem.cores, 0, Direction::Read, mem.l2, table.layers[0].in_bytes);
    for i in 0..n - 1 {
        push(&mut out, &mem.cores, i, Direction::Write, mem.l1[i + 1], table.layers[i].out_bytes);
    }
    push(&mut out, &mem.cores, n - 1, Direction::Write, mem.l2, table.layers[n - 1].out_bytes);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{AddressMap, Preset};
    use crate::traffic::TrafficKind;

    #[derive(Debug, PartialEq, Eq, Hash, Clone, Copy)]
    enum Flow {
        L2ToL1,
        L1ToL2,
        L1ToL1,
    }

    fn classify(r: &TraceRecord, map: &AddressMap, l2: u64) -> (Flow, Coord) {
        let region = map.lookup(r.address).unwrap();
        let is_l2 = r.address >= l2 && r.address < region.end() && region.contains(l2);
        let flow = match (r.direction, is_l2) {
            (Direction::Read, true) => Flow::L2ToL1,
            (Direction::Write, true) => Flow::L1ToL2,
            (Direction::Write, false) => Flow::L1ToL1,
            (Direction::Read, false) => panic!("reads only come from L2"),
        };
        (flow, region.coord)
    }

    fn setup(kind: TrafficKind) -> (NocConfig, TrafficSpec, AddressMap, u64) {
        let cfg = Preset::Slim4x4.config();
        let map = allocate_address_map(&cfg).unwrap();
        let l2 = map.region_of(Coord::new(0, 0)).unwrap().base + cfg.endpoint_region_bytes / 2;
        (cfg, TrafficSpec::new(kind), map, l2)
    }

    #[test]
    fn bundled_tables_parse() {
        assert_eq!(LayerTable::resnet34_shrunk().layers.len(), 34);
        let vgg = LayerTable::vgg16_tiled();
        assert_eq!(vgg.layers.len(), 16);
        for w in vgg.layers.windows(2) {
            assert_eq!(w[1].in_bytes, w[0].out_bytes);
        }
        assert!(LayerTable::from_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(LayerTable::from_csv("layer,in_bytes,out_bytes,weight_bytes\nx,1,zz,3\n".as_bytes()).is_err());
    }

    #[test]
    fn training_has_three_flow_classes_and_equal_gradients() {
        let (cfg, spec, map, l2) = setup(TrafficKind::DnnTraining);
        let recs = gen_dnn_training(&spec, &cfg, &LayerTable::resnet34_shrunk()).unwrap();
        let mut bytes = std::collections::HashMap::new();
        let mut grad = [0u64; 16];
        for r in &recs {
            let (flow, _) = classify(r, &map, l2);
            *bytes.entry(flow).or_insert(0u64) += r.bytes;
            if flow == Flow::L1ToL1 {
                grad[cfg.master_index(r.master).unwrap()] += r.bytes;
            }
        }
        assert_eq!(bytes.len(), 3);
        assert!(bytes.values().all(|&b| b > 0));
        assert!(grad.iter().all(|&g| g == grad[0] && g > 0));

        let mut off = spec.clone();
        off.gradient_exchange = false;
        let recs = gen_dnn_training(&off, &cfg, &LayerTable::resnet34_shrunk()).unwrap();
        assert!(recs.iter().all(|r| classify(r, &map, l2).0 != Flow::L1ToL1));
    }

    #[test]
    fn parallel_conv_is_l2_only() {
        let (cfg, spec, map, l2) = setup(TrafficKind::DnnParallelConv);
        let table = LayerTable::vgg16_tiled();
        let recs = gen_dnn_parallel_conv(&spec, &cfg, &table).unwrap();
        let mut reads = [false; 16];
        let mut writes = vec![false; 16];
        let mut read_bytes = 0;
        for r in &recs {
            let (flow, _) = classify(r, &map, l2);
            assert_ne!(flow, Flow::L1ToL1);
            let m = cfg.master_index(r.master).unwrap();
            if r.direction == Direction::Read {
                reads[m] = true;
                read_bytes += r.bytes;
            } else {
                writes[m] = true;
            }
        }
        assert!(reads.iter().chain(&writes).all(|&x| x));
        let expected: u64 = table.layers.iter().map(|l| l.in_bytes.div_ceil(16) * 16).sum();
        assert_eq!(read_bytes, expected);
    }

    #[test]
    fn pipelined_conv_is_a_chain() {
        let (cfg, spec, map, l2) = setup(TrafficKind::DnnPipelinedConv);
        let table = LayerTable::vgg16_tiled();
        let recs = gen_dnn_pipelined_conv(&spec, &cfg, &table).unwrap();
        let mut edges = Vec::new();
        for r in &recs {
            let (flow, dst) = classify(r, &map, l2);
            let src = cfg.master_index(r.master).unwrap();
            match flow {
                Flow::L1ToL1 => {
                    let dst = cfg.master_index(dst).unwrap();
                    assert_eq!(r.bytes, table.layers[src].out_bytes);
                    edges.push((src, dst));
                }
                _ => assert!(src == 0 || src == 15),
            }
        }
        assert_eq!(edges, (0..15).map(|i| (i, i + 1)).collect::<Vec<_>>());
    }

    #[test]
    fn short_tables_are_rejected() {
        let (cfg, spec, _, _) = setup(TrafficKind::DnnPipelinedConv);
        let mut t = LayerTable::vgg16_tiled();
        t.layers.truncate(4);
        assert!(gen_dnn_pipelined_conv(&spec, &cfg, &t).is_err());
    }
}
