use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lesionforge::augment::{apply_plan, sample_plan, SamplingPolicy};
use lesionforge::metrics::{self, compare_methods, evaluate_case, DetectionThresholds, MethodReport, Metric};
use lesionforge::synth::{
    external_editor, save_pair, serve_request, synthesize_pair, BaselineEditor, EditorDescriptor, LesionEditor,
    Provenance, SynthesisPolicy,
};
use lesionforge::volume::{load_mask, load_volume, save_mask, save_volume, DataType};
use lesionforge::Volume;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::{Case, LoadedManifest, Manifest};
use crate::{sub_seed, thread_pool, CliError, Common};

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{what} {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    bytes.push(b'\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Usage(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

/// Resolved inputs of a run, written as `run.json`.
#[derive(Serialize)]
struct RunRecord<'a, C: Serialize> {
    command: &'a str,
    seed: u64,
    manifest: &'a Path,
    config: &'a C,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    options: BTreeMap<&'a str, serde_json::Value>,
}

#[derive(Serialize)]
struct CaseFailure {
    id: String,
    error: String,
}

/// Logs and records failures; returns the partial-failure error if any.
fn finish(out: Option<&Path>, failures: Vec<CaseFailure>, total: usize) -> Result<(), CliError> {
    if failures.is_empty() {
        return Ok(());
    }
    for f in &failures {
        log::error!("{}: {}", f.id, f.error);
        eprintln!("failed: {}: {}", f.id, f.error);
    }
    if let Some(dir) = out {
        write_json(&dir.join("errors.json"), &failures)?;
    }
    Err(CliError::Partial {
        failed: failures.len(),
        total,
    })
}

fn load_manifest(path: &Path) -> Result<Option<LoadedManifest>, CliError> {
    let manifest = Manifest::load(path)?;
    if manifest.cases.is_empty() {
        log::warn!("manifest {} has no cases; nothing to do", path.display());
        return Ok(None);
    }
    Ok(Some(manifest))
}

pub fn augment(common: &Common, config: Option<&Path>) -> Result<(), CliError> {
    let policy: SamplingPolicy = match config {
        Some(p) => read_json(p, "sampling policy")?,
        None => SamplingPolicy::default(),
    };
    policy.validate()?;
    let pool = thread_pool(common.jobs)?;
    let Some(manifest) = load_manifest(&common.manifest)? else {
        return Ok(());
    };
    create_dir(&common.out)?;

    let process = |case: &Case| -> Result<(), String> {
        let flair = manifest.path(case, "flair")?;
        let volume = load_volume(&flair).map_err(|e| format!("{}: {e}", flair.display()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(common.seed, "augment", &case.id, 0));
        let plan = sample_plan(&policy, &mut rng).map_err(|e| e.to_string())?;
        let augmented = apply_plan(&volume, &plan).map_err(|e| e.to_string())?;
        let dir = common.out.join(&case.id);
        fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        save_volume(&augmented, dir.join("flair.nii.gz"), DataType::Float32).map_err(|e| e.to_string())?;
        write_json(&dir.join("plan.json"), &plan).map_err(|e| e.to_string())
    };
    let results: Vec<_> = pool.install(|| manifest.cases.par_iter().map(|c| (c.id.clone(), process(c))).collect());

    write_json(
        &common.out.join("run.json"),
        &RunRecord {
            command: "augment",
            seed: common.seed,
            manifest: &common.manifest,
            config: &policy,
            options: BTreeMap::new(),
        },
    )?;
    let total = results.len();
    let failures = results
        .into_iter()
        .filter_map(|(id, r)| r.err().map(|error| CaseFailure { id, error }))
        .collect();
    finish(Some(&common.out), failures, total)
}

/// Which lesion editor `synthesize` uses.
#[derive(Debug, Clone)]
pub enum EditorChoice {
    Baseline,
    External(EditorDescriptor),
}

impl EditorChoice {
    pub fn parse(editor: String, args: Vec<String>, timeout_secs: f64) -> Self {
        if editor == "baseline" && args.is_empty() {
            Self::Baseline
        } else {
            Self::External(EditorDescriptor {
                program: PathBuf::from(editor),
                args,
                timeout_secs,
            })
        }
    }

    fn build(&self) -> Result<Box<dyn LesionEditor>, CliError> {
        Ok(match self {
            Self::Baseline => Box::new(BaselineEditor),
            Self::External(d) => Box::new(external_editor(d.clone())?),
        })
    }
}

struct CaseInputs {
    flair: Volume,
    lesion_mask: lesionforge::BinaryMask,
    atlas: Option<Volume>,
    wm_mask: Option<lesionforge::BinaryMask>,
}

fn load_synthesis_inputs(manifest: &LoadedManifest, case: &Case) -> Result<CaseInputs, String> {
    let path = |role| manifest.path(case, role);
    let ctx = |p: &Path, e: lesionforge::Error| format!("{}: {e}", p.display());
    let flair_path = path("flair")?;
    let mask_path = path("lesion_mask")?;
    let flair = load_volume(&flair_path).map_err(|e| ctx(&flair_path, e))?;
    let lesion_mask = load_mask(&mask_path).map_err(|e| ctx(&mask_path, e))?;
    let atlas = match case.atlas.is_some() {
        true => {
            let p = path("atlas")?;
            Some(load_volume(&p).map_err(|e| ctx(&p, e))?)
        }
        false => None,
    };
    let wm_mask = match case.wm_mask.is_some() {
        true => {
            let p = path("wm_mask")?;
            Some(load_mask(&p).map_err(|e| ctx(&p, e))?)
        }
        false => None,
    };
    Ok(CaseInputs {
        flair,
        lesion_mask,
        atlas,
        wm_mask,
    })
}

pub fn pair_id(case_id: &str, index: usize) -> String {
    format!("{case_id}_pair{index:04}")
}

fn synthesize_one(
    inputs: &CaseInputs,
    editor: &dyn LesionEditor,
    policy: &SynthesisPolicy,
    case_id: &str,
    index: usize,
    seed: u64,
    out: &Path,
) -> Result<Case, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = synthesize_pair(
        &inputs.flair,
        &inputs.lesion_mask,
        editor,
        policy,
        inputs.atlas.as_ref(),
        inputs.wm_mask.as_ref(),
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    let id = pair_id(case_id, index);
    let provenance = Provenance::new(&pair, case_id, index, seed, editor.name(), policy);
    save_pair(&pair, &provenance, &out.join(&id)).map_err(|e| e.to_string())?;
    Ok(Case {
        t1: Some(PathBuf::from(format!("{id}/t1.nii.gz"))),
        t2: Some(PathBuf::from(format!("{id}/t2.nii.gz"))),
        gt: Some(PathBuf::from(format!("{id}/new_lesions.nii.gz"))),
        id,
        ..Case::default()
    })
}

pub fn synthesize(
    common: &Common,
    config: Option<&Path>,
    editor: &EditorChoice,
    n_pairs: usize,
    replay: Option<&Path>,
) -> Result<(), CliError> {
    let replayed: Option<Provenance> = replay.map(|p| read_json(p, "provenance")).transpose()?;
    let policy: SynthesisPolicy = match (&replayed, config) {
        (Some(p), _) => p.policy.clone(),
        (None, Some(path)) => read_json(path, "synthesis policy")?,
        (None, None) => SynthesisPolicy::default(),
    };
    policy.validate()?;
    if n_pairs == 0 {
        return Err(CliError::Usage("--n-pairs must be >= 1".into()));
    }
    let editor_impl = editor.build()?;
    let pool = thread_pool(common.jobs)?;
    let Some(manifest) = load_manifest(&common.manifest)? else {
        return Ok(());
    };
    create_dir(&common.out)?;

    if let Some(prov) = replayed {
        let case = manifest
            .cases
            .iter()
            .find(|c| c.id == prov.case_id)
            .ok_or_else(|| CliError::Usage(format!("case {:?} is not in the manifest", prov.case_id)))?;
        let inputs = load_synthesis_inputs(&manifest, case).map_err(CliError::Usage)?;
        let entry = synthesize_one(
            &inputs,
            editor_impl.as_ref(),
            &policy,
            &case.id,
            prov.pair_index,
            prov.seed,
            &common.out,
        )
        .map_err(CliError::Usage)?;
        return write_json(
            &common.out.join("manifest.json"),
            &Manifest {
                base_dir: None,
                cases: vec![entry],
            },
        );
    }

    let editor_ref = editor_impl.as_ref();
    let results: Vec<(String, Result<Case, String>)> = pool.install(|| {
        manifest
            .cases
            .par_iter()
            .flat_map_iter(|case| {
                let inputs = load_synthesis_inputs(&manifest, case);
                (0..n_pairs)
                    .map(|k| {
                        let seed = sub_seed(common.seed, "synthesize", &case.id, k as u64);
                        let result = match &inputs {
                            Ok(inputs) => {
                                synthesize_one(inputs, editor_ref, &policy, &case.id, k, seed, &common.out)
                            }
                            Err(e) => Err(e.clone()),
                        };
                        (pair_id(&case.id, k), result)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    });

    let total = results.len();
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(c) => cases.push(c),
            Err(error) => failures.push(CaseFailure { id, error }),
        }
    }
    write_json(&common.out.join("manifest.json"), &Manifest { base_dir: None, cases })?;
    let mut options = BTreeMap::new();
    options.insert("n_pairs", serde_json::json!(n_pairs));
    options.insert("editor", serde_json::json!(editor_ref.name()));
    write_json(
        &common.out.join("run.json"),
        &RunRecord {
            command: "synthesize",
            seed: common.seed,
            manifest: &common.manifest,
            config: &policy,
            options,
        },
    )?;
    finish(Some(&common.out), failures, total)
}

pub fn evaluate(
    manifest_path: &Path,
    config: Option<&Path>,
    method: &str,
    out: &Path,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let thresholds: DetectionThresholds = match config {
        Some(p) => read_json(p, "detection thresholds")?,
        None => DetectionThresholds::default(),
    };
    thresholds.validate()?;
    let pool = thread_pool(jobs)?;
    let manifest = Manifest::load(manifest_path)?;
    if manifest.cases.is_empty() {
        log::warn!("manifest {} has no cases", manifest_path.display());
    }
    let process = |case: &Case| -> Result<metrics::CaseReport, String> {
        let pred_path = manifest.path(case, "prediction")?;
        let gt_path = manifest.path(case, "gt")?;
        let pred = load_mask(&pred_path).map_err(|e| format!("{}: {e}", pred_path.display()))?;
        let gt = load_mask(&gt_path).map_err(|e| format!("{}: {e}", gt_path.display()))?;
        evaluate_case(&pred, &gt, &thresholds).map_err(|e| e.to_string())
    };
    let results: Vec<_> = pool.install(|| manifest.cases.par_iter().map(|c| (c.id.clone(), process(c))).collect());
    let total = results.len();
    let mut cases = BTreeMap::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(report) => {
                cases.insert(id, report);
            }
            Err(error) => failures.push(CaseFailure { id, error }),
        }
    }
    let report = MethodReport::new(method, thresholds, cases);
    write_json(out, &report)?;
    print!("{}", report.table());
    finish(None, failures, total)
}

pub fn compare(report_a: &Path, report_b: &Path, metric: &str, out: Option<&Path>) -> Result<(), CliError> {
    let metric: Metric = metric.parse()?;
    let a: MethodReport = read_json(report_a, "report")?;
    let b: MethodReport = read_json(report_b, "report")?;
    let c = compare_methods(&a, &b, metric)?;
    println!("metric: {}", c.metric);
    println!("cases: {}", c.n_cases);
    println!("mean {}: {:.3}", c.method_a, metrics::round3(c.mean_a));
    println!("mean {}: {:.3}", c.method_b, metrics::round3(c.mean_b));
    println!("W = {}", c.statistic);
    println!("p = {} ({})", c.p_value, if c.exact { "exact" } else { "normal approximation" });
    println!("verdict: {} at p < 0.05", c.verdict());
    if let Some(path) = out {
        write_json(path, &c)?;
    }
    Ok(())
}

pub fn consensus(maps: &[PathBuf], threshold: f64, out: &Path) -> Result<(), CliError> {
    let volumes = maps
        .iter()
        .map(|p| load_volume(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&Volume> = volumes.iter().collect();
    let mask = metrics::consensus(&refs, threshold)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_mask(&mask, out)?;
    Ok(())
}

pub fn edit_handler(dir: &Path) -> Result<(), CliError> {
    serve_request(dir, &BaselineEditor)?;
    Ok(())
}
