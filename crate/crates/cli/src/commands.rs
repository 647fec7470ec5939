use std::fmt::Write as _;
use std::path::Path;

use rtsfnet::checkpoint;
use rtsfnet::data::{Dataset, DatasetId, Split};
use rtsfnet::model::{probe_segments, Batch, Model, ModelConfig};
use rtsfnet::trainer::{evaluate, select_final, train as run_training, Choice, RunConfig};
use rtsfnet::tsf::{extract_block_features, BlockSpec, Feature};
use rtsfnet::{Error, Result};

use crate::manifest::{sha256_hex, RunManifest};
use crate::{Common, Failure, Outcome};

pub const HISTORY: &str = "history.csv";
pub const CONFUSION: &str = "confusion.csv";
pub const REPORT: &str = "report.txt";
pub const BEST: &str = "checkpoint-best.bin";
pub const FINAL: &str = "checkpoint-final.bin";
pub const FEATURES: &str = "features.csv";

const GRADCHECK_TOLERANCE: f64 = 1e-3;

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFiles(vec![path.to_path_buf()]));
    }
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn prepare(args: &[String], dataset: &str, root: &Path, out: &Path, raw: bool) -> Outcome {
    let id: DatasetId = dataset.parse()?;
    let mut m = RunManifest::new(args, out);
    m.dataset = Some(id.to_string());
    m.extra.push(("root".into(), root.display().to_string()));
    m.extra.push(("standardized".into(), (!raw).to_string()));
    m.write(out)?;
    let mut ds = id.load(root)?;
    if !raw {
        ds.standardize()?;
    }
    ds.write(out)?;
    println!("{}: window {} stride {} at {} Hz, {} channels", ds.name, ds.window, ds.stride, ds.rate_hz, ds.layout.len());
    for s in Split::ALL {
        println!("{:<10} {:>7} segments  members: {}", s.name(), ds.split(s).len(), ds.members[s.index()].join(" "));
    }
    println!();
    print!("{:<28}", "class");
    for s in Split::ALL {
        print!(" {:>10}", s.name());
    }
    println!();
    let hist: Vec<Vec<usize>> = Split::ALL.iter().map(|&s| ds.class_histogram(s)).collect();
    for (c, name) in ds.class_names.iter().enumerate() {
        print!("{name:<28}");
        for h in &hist {
            print!(" {:>10}", h[c]);
        }
        println!();
    }
    Ok(())
}

fn bind_model(cfg: &mut ModelConfig, ds: &Dataset) -> Result<()> {
    if cfg.channels.is_empty() {
        *cfg = cfg.clone().with_data(&ds.layout, ds.window);
    } else if cfg.segment_length == 0 {
        cfg.segment_length = ds.window;
    }
    if cfg.class_count != ds.class_names.len() {
        return Err(Error::config(format!(
            "model has {} classes but dataset {} has {}",
            cfg.class_count,
            ds.name,
            ds.class_names.len()
        )));
    }
    Ok(())
}

pub fn train(
    args: &[String],
    config: &Path,
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    max_epochs: Option<usize>,
    common: Common,
) -> Outcome {
    let text = read_text(config)?;
    let mut rc = RunConfig::load(config)?;
    if let Some(s) = seed {
        rc.seed = s;
    }
    if let Some(e) = max_epochs {
        rc.train.max_epochs = e;
    }
    rc.train.workers = common.workers as usize;
    rc.train.validate()?;
    let ds = Dataset::read(data)?;
    bind_model(&mut rc.model, &ds)?;
    rc.model.validate()?;
    let model = Model::new(rc.model.clone(), rc.seed)?;

    let mut m = RunManifest::new(args, out);
    m.config_path = Some(config.display().to_string());
    m.config_hash = Some(sha256_hex(text.as_bytes()));
    m.dataset = Some(ds.name.clone());
    m.seed = Some(rc.seed);
    m.extra.push(("data".into(), data.display().to_string()));
    m.extra.push(("model_sha256".into(), checkpoint::hex(&checkpoint::config_hash(&rc.model)?)));
    m.extra.push(("parameters".into(), model.params().scalar_count().to_string()));
    m.write(out)?;

    let train_set = ds.split(Split::Train);
    let val_set = ds.split(Split::Validation);
    println!(
        "training {} parameters on {} segments ({} validation), seed {}",
        model.params().scalar_count(),
        train_set.len(),
        val_set.len(),
        rc.seed
    );
    let outcome = run_training(model, &ds.layout, train_set, val_set, &rc.train, rc.seed, |r| {
        println!(
            "epoch {:>3}  train {:.5}  val {:.5}  acc {:>6.2}  mf1 {:.4}  lr {:.3e}",
            r.epoch,
            r.train_loss,
            r.val_loss,
            100.0 * r.val_accuracy,
            r.val_macro_f1,
            r.lr
        );
    })?;
    write(&out.join(HISTORY), &outcome.history.to_csv())?;
    checkpoint::save(&outcome.best, &out.join(BEST))?;
    let best_epoch = outcome.history.best_epoch;
    let last_epoch = outcome.history.epochs.len();
    let (chosen, which) = select_final(outcome.best, outcome.last, &ds.layout, val_set, rc.train.workers)?;
    checkpoint::save(&chosen, &out.join(FINAL))?;
    let how = if outcome.history.stopped_early { "early stop" } else { "epoch limit" };
    let (label, epoch) = match which {
        Choice::Best => ("best-validation-loss", best_epoch),
        Choice::Last => ("last", last_epoch),
    };
    println!("stopped after {last_epoch} epochs ({how}); final model is the {label} checkpoint (epoch {epoch})");
    Ok(())
}

pub fn eval(args: &[String], ckpt: &Path, data: &Path, split: &str, out: &Path, common: Common) -> Outcome {
    let split = Split::parse(split)?;
    let cp = checkpoint::read(ckpt)?;
    let mut m = RunManifest::new(args, out);
    m.config_hash = Some(checkpoint::hex(&cp.config_hash));
    m.extra.push(("checkpoint".into(), ckpt.display().to_string()));
    m.extra.push(("data".into(), data.display().to_string()));
    m.extra.push(("split".into(), split.name().into()));
    let model = cp.into_model()?;
    let ds = Dataset::read(data)?;
    m.dataset = Some(ds.name.clone());
    if model.config().class_count != ds.class_names.len() {
        return Err(Error::config(format!(
            "checkpoint has {} classes but dataset {} has {}",
            model.config().class_count,
            ds.name,
            ds.class_names.len()
        ))
        .into());
    }
    m.write(out)?;
    let (loss, report) = evaluate(&model, &ds.layout, ds.split(split), common.workers as usize)?;
    let mut text = String::new();
    writeln!(text, "dataset = {}", ds.name).unwrap();
    writeln!(text, "split = {}", split.name()).unwrap();
    writeln!(text, "loss = {loss:.6}").unwrap();
    text.push_str(&report.to_text(&ds.class_names));
    write(&out.join(REPORT), &text)?;
    write(&out.join(CONFUSION), &report.matrix.to_csv(&ds.class_names))?;
    print!("{text}");
    Ok(())
}

fn parse_blockspec(text: &str, features: Option<&str>) -> Result<BlockSpec> {
    let bad = || Error::config(format!("block spec {text:?} is not LENGTH or LENGTH/OVERLAP"));
    let (len, overlap) = match text.split_once('/') {
        Some((l, o)) => (l.trim().parse().map_err(|_| bad())?, o.trim().parse().map_err(|_| bad())?),
        None => (text.trim().parse().map_err(|_| bad())?, 0),
    };
    let feats = match features {
        Some(list) => Feature::parse_list(&list.replace([',', ';'], "\n"))?,
        None => rtsfnet::tsf::selected_features(),
    };
    if feats.is_empty() {
        return Err(Error::config("no features selected"));
    }
    BlockSpec::new(len, overlap, feats)
}

fn feature_columns(spec: &BlockSpec) -> Vec<String> {
    let mut cols = Vec::new();
    for f in &spec.features {
        let name = format!("f{}", f.to_string().replace(' ', "_"));
        let w = f.width(spec.block_length);
        if w == 1 {
            cols.push(name);
        } else {
            cols.extend((0..w).map(|k| format!("{name}[{k}]")));
        }
    }
    cols.extend(["tag_location", "tag_sensor", "tag_axis"].map(String::from));
    cols
}

pub fn features(
    args: &[String],
    data: &Path,
    blockspec: &str,
    list: Option<&str>,
    split: &str,
    limit: Option<usize>,
    out: &Path,
) -> Outcome {
    let split = Split::parse(split)?;
    let spec = parse_blockspec(blockspec, list)?;
    let ds = Dataset::read(data)?;
    let mut m = RunManifest::new(args, out);
    m.dataset = Some(ds.name.clone());
    m.extra.push(("data".into(), data.display().to_string()));
    m.extra.push(("split".into(), split.name().into()));
    m.write(out)?;
    let tags = ds.layout.tags();
    let segs = ds.split(split);
    let segs = &segs[..limit.unwrap_or(segs.len()).min(segs.len())];
    let mut csv = String::from("segment,label,channel,block");
    for c in feature_columns(&spec) {
        csv.push(',');
        csv.push_str(&c);
    }
    csv.push('\n');
    for (i, seg) in segs.iter().enumerate() {
        let ft = extract_block_features(seg, &tags, &spec)?;
        for a in 0..ft.axes {
            for b in 0..ft.blocks {
                write!(csv, "{i},{},{},{b}", seg.label, ds.layout.channels[a].name).unwrap();
                for v in ft.get(a, b) {
                    write!(csv, ",{v}").unwrap();
                }
                csv.push('\n');
            }
        }
    }
    write(&out.join(FEATURES), &csv)?;
    println!("{} segments x {} channels written to {}", segs.len(), ds.layout.len(), out.join(FEATURES).display());
    Ok(())
}

pub fn gradcheck(config: Option<&Path>, seed: u64, batch: usize, eps: f64, stride: usize) -> Outcome {
    if batch == 0 || stride == 0 {
        return Err(Error::usage("--batch and --stride must be positive").into());
    }
    let cfg = match config {
        None => ModelConfig::tiny(),
        Some(p) => {
            let cfg = RunConfig::load(p)?.model;
            if cfg.channels.is_empty() || cfg.segment_length == 0 {
                return Err(Error::config("gradient check needs `channels` and `segment_length` in the model config").into());
            }
            cfg
        }
    };
    let model = Model::new(cfg, seed)?;
    let segs = probe_segments(model.config(), batch, seed.wrapping_add(1));
    let b = Batch::from_segments(&segs.iter().collect::<Vec<_>>())?;
    let n = model.params().scalar_count();
    let coords: Vec<usize> = (0..n).step_by(stride).collect();
    let r = model.gradient_check(&b, eps, Some(&coords))?;
    println!("parameters          {n}");
    println!("checked             {}", r.checked.len());
    println!("kinked (excluded)   {}", r.kinked.len());
    if !r.kinked.is_empty() {
        println!("kinked max rel err  {:.3e}", r.kinked_max_rel_error);
    }
    println!("max relative error  {:.3e} (parameter {})", r.max_rel_error, r.worst);
    if r.max_rel_error < GRADCHECK_TOLERANCE {
        println!("PASS (< {GRADCHECK_TOLERANCE:e})");
        Ok(())
    } else {
        println!("FAIL (>= {GRADCHECK_TOLERANCE:e})");
        Err(Failure {
            code: "E-CHECK",
            message: format!("max relative gradient error {:.3e} exceeds {GRADCHECK_TOLERANCE:e}", r.max_rel_error),
        })
    }
}

struct HistoryRow {
    epoch: usize,
    train: f64,
    val: f64,
    lr: f64,
}

fn parse_history(path: &Path, text: &str) -> Result<Vec<HistoryRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |msg: &str| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            msg: msg.into(),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad("expected 4 fields"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("not a number: {s:?}")));
        rows.push(HistoryRow {
            epoch: f[0].trim().parse().map_err(|_| bad("bad epoch"))?,
            train: num(f[1])?,
            val: num(f[2])?,
            lr: num(f[3])?,
        });
    }
    Ok(rows)
}

pub fn report(run: &Path) -> Outcome {
    let (hp, rp, mp) = (run.join(HISTORY), run.join(REPORT), run.join(crate::manifest::MANIFEST));
    if !hp.exists() && !rp.exists() {
        return Err(Error::MissingFiles(vec![hp, rp]).into());
    }
    if mp.exists() {
        print!("{}", read_text(&mp)?);
        println!();
    }
    if hp.exists() {
        let rows = parse_history(&hp, &read_text(&hp)?)?;
        if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
            let best = rows.iter().min_by(|a, b| a.val.total_cmp(&b.val)).unwrap();
            let reductions = rows.windows(2).filter(|w| w[1].lr < w[0].lr).count();
            println!("epochs              {}", rows.len());
            println!("best val loss       {:.5} (epoch {})", best.val, best.epoch);
            println!("train loss          {:.5} -> {:.5}", first.train, last.train);
            println!("learning rate       {:.3e} -> {:.3e} ({reductions} reductions)", first.lr, last.lr);
        }
        println!();
    }
    if rp.exists() {
        print!("{}", read_text(&rp)?);
    }
    Ok(())
}
