use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use vstain_core::metrics::{error_index, error_mask, evaluate_pairs, ErrorIndexMode};

use crate::exit::AlignmentError;
use crate::manifest::RunRecord;

use super::{pgm_files, read_pgm, write_bytes};

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    /// Only files whose names end with this are paired.
    pub suffix: String,
    pub beta1: f64,
    pub beta2: f64,
    pub mode: ErrorIndexMode,
    pub mask_threshold: u32,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |x| format!("{x:.12}"))
}

fn matching(dir: &Path, suffix: &str) -> Result<BTreeSet<String>> {
    Ok(pgm_files(dir)?.into_iter().filter(|n| n.ends_with(suffix)).collect())
}

pub fn run_eval(args: &EvalArgs, out: &Path, mut record: RunRecord) -> Result<()> {
    let preds = matching(&args.pred_dir, &args.suffix)?;
    let gts = matching(&args.gt_dir, &args.suffix)?;
    let mut orphans: Vec<String> = preds.difference(&gts).map(|n| format!("pred:{n}")).collect();
    orphans.extend(gts.difference(&preds).map(|n| format!("gt:{n}")));
    if !orphans.is_empty() {
        return Err(AlignmentError { orphans }.into());
    }
    if preds.is_empty() {
        return Err(AlignmentError { orphans: vec![format!("no *{} files", args.suffix)] }.into());
    }
    let names: Vec<&String> = preds.iter().collect();
    let (mut pred_imgs, mut gt_imgs) = (Vec::new(), Vec::new());
    for name in &names {
        let (p, g) = (args.pred_dir.join(name), args.gt_dir.join(name));
        pred_imgs.push(read_pgm(&p)?);
        gt_imgs.push(read_pgm(&g)?);
        record.add_input("pred", &args.pred_dir, &p)?;
        record.add_input("gt", &args.gt_dir, &g)?;
    }
    let (reports, agg) = evaluate_pairs(&pred_imgs, &gt_imgs)?;
    let mut csv = String::from("name,mae,psnr,ssim,tl,argmin_threshold,mask_pixels\n");
    let mut tl_sum = 0.0;
    for (i, name) in names.iter().enumerate() {
        let stem = name.strip_suffix(".pgm").unwrap_or(name);
        let curve = error_index(&pred_imgs[i], &gt_imgs[i], args.beta1, args.beta2, args.mode)
            .with_context(|| format!("error index for {name}"))?;
        let mask = error_mask(&pred_imgs[i], &gt_imgs[i], args.mask_threshold)?;
        write_bytes(&out.join("curves").join(format!("{stem}.csv")), curve.to_csv().as_bytes())?;
        write_bytes(&out.join("masks").join(format!("{stem}_mask.pgm")), &mask.to_pgm())?;
        write_bytes(&out.join("masks").join(format!("{stem}_overlay.ppm")), &mask.overlay_ppm(&pred_imgs[i]))?;
        let r = &reports[i];
        let _ = writeln!(
            csv,
            "{name},{:.12},{:.12},{},{:.12},{},{}",
            r.mae,
            r.psnr,
            fmt_opt(r.ssim),
            curve.tl,
            curve.argmin_threshold,
            mask.count()
        );
        tl_sum += curve.tl;
    }
    write_bytes(&out.join("metrics.csv"), csv.as_bytes())?;
    let mut s = String::new();
    let _ = writeln!(s, "count={}", agg.count);
    let _ = writeln!(s, "mean_mae={:.12}", agg.mean_mae);
    let _ = writeln!(s, "mean_psnr={}", fmt_opt(agg.mean_psnr));
    let _ = writeln!(s, "infinite_psnr={}", agg.infinite_psnr);
    let _ = writeln!(s, "mean_ssim={}", fmt_opt(agg.mean_ssim));
    let _ = writeln!(s, "mean_tl={:.12}", tl_sum / agg.count as f64);
    let _ = writeln!(s, "beta1={}", args.beta1);
    let _ = writeln!(s, "beta2={}", args.beta2);
    let _ = writeln!(s, "mode={}", args.mode);
    let _ = writeln!(s, "mask_threshold={}", args.mask_threshold);
    write_bytes(&out.join("summary.txt"), s.as_bytes())?;
    print!("{s}");
    record.finish()
}
