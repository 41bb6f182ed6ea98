//! Staged synthesis pipeline: ground-truth table in, natural-language
//! document plus labeled artifacts out.
//!
//! Stages run in order, each guarded by a deterministic checker so a
//! wandering model can only waste retries, never corrupt artifacts:
//!
//! 1. annotate every cell with a coarse capability category
//! 2. refine each indirect cell to a sub-capability and synthesize inverse
//!    evidence for it, verifier-audited
//! 3. plan the document sections with full evidence coverage
//! 4. write each section, verifier-audited, fragments verbatim
//! 5. assemble the document and record provenance
//!
//! Every stage writes its artifact into the case directory and records a
//! checkpoint, so an interrupted run can resume without repeating paid
//! calls.

mod annotate;
mod assemble;
mod checkpoint;
mod evidence;
mod judge;
mod plan;
mod render;
mod verdict;
mod writer;

pub use annotate::{annotation_loop, AnnotationOutcome};
pub use assemble::{assemble_case, AssembledCase};
pub use checkpoint::{sha256_json, Checkpoint, CHECKPOINT_FILE};
pub use evidence::{evidence_loop, EvidenceOutcome, FlaggedCell};
pub use judge::{judge_document, QualityScores};
pub use plan::plan_loop;
pub use verdict::{parse_check_verdict, parse_error_list_verdict, VerifierVerdict};
pub use writer::{write_sections, WriteOutcome};

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{
    self, DOCUMENT_FILE, EVIDENCE_FILE, MATRIX_FILE, PLAN_FILE, PROVENANCE_FILE, QUALITY_FILE,
    RUN_LOG_FILE, SCHEMA_FILE, TABLE_FILE, WORKING_DIR,
};
use crate::gateway::{Gateway, GatewayError};
use crate::model::{
    canonical_evidence, CapabilityLabel, CapabilityMatrix, EvidenceItem, ModelError, Schema,
    SubCapability, Table, WritingPlan,
};
use crate::prompts::PromptSet;

const ANNOTATION_WORKING_FILE: &str = "annotation.json";
const EVIDENCE_WORKING_FILE: &str = "evidence_stage.json";
const SECTIONS_WORKING_FILE: &str = "sections.json";

const STAGE_ANNOTATION: &str = "annotation";
const STAGE_EVIDENCE: &str = "evidence";
const STAGE_PLAN: &str = "plan";
const STAGE_WRITE: &str = "write";
const STAGE_JUDGE: &str = "judge";

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("artifact serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{stage} stage produced unusable output: {detail}")]
    StageOutput { stage: &'static str, detail: String },
    #[error("planner never covered all evidence after {attempts} attempts: {detail}")]
    PlanExhausted { attempts: u32, detail: String },
}

/// Model name used for each agent role. Roles can share one model or be
/// split across differently sized ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentModels {
    pub annotator: String,
    pub refiner: String,
    pub verifier: String,
    pub planner: String,
    pub writer: String,
    pub judge: String,
}

impl AgentModels {
    pub fn uniform(name: &str) -> AgentModels {
        AgentModels {
            annotator: name.to_string(),
            refiner: name.to_string(),
            verifier: name.to_string(),
            planner: name.to_string(),
            writer: name.to_string(),
            judge: name.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub models: AgentModels,
    /// Annotator calls before unassigned cells fall back to EMPTY.
    pub annotation_rounds: u32,
    /// Refine attempts per cell before it is flagged and downgraded.
    pub evidence_retries: u32,
    /// Planner attempts before the case fails.
    pub plan_retries: u32,
    /// Writer attempts per section before it is flagged.
    pub section_retries: u32,
    /// Score the assembled document with the judge model. Off by default:
    /// judging costs an extra call per case and is not needed to use the
    /// case downstream.
    pub run_judge: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            models: AgentModels::uniform("default"),
            annotation_rounds: 3,
            evidence_retries: 3,
            plan_retries: 3,
            section_retries: 2,
            run_judge: false,
        }
    }
}

/// One case to synthesize.
#[derive(Debug, Clone)]
pub struct CaseInputs<'a> {
    pub case_id: &'a str,
    pub schema: &'a Schema,
    pub table: &'a Table,
    /// Pre-built evidence to fuse into a document directly, skipping the
    /// annotation and refinement stages. Cells the set does not cover are
    /// stated canonically; missing cells stay unstated.
    pub external_evidence: Option<&'a [EvidenceItem]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisOutcome {
    pub case_id: String,
    pub dir: PathBuf,
    pub degraded: bool,
    pub flagged_cells: Vec<FlaggedCell>,
    pub flagged_sections: Vec<usize>,
    /// Backend calls made by this run, per stage; a resumed stage counts 0.
    pub calls_by_stage: BTreeMap<String, u32>,
    pub quality: Option<QualityScores>,
    pub doc_tokens: usize,
    pub warnings: Vec<String>,
}

/// Per-case log written alongside the artifacts. The timestamps make this
/// the one file that differs between otherwise identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLog {
    pub case_id: String,
    pub models: AgentModels,
    pub calls_by_stage: BTreeMap<String, u32>,
    pub degraded: bool,
    pub flagged_cells: Vec<FlaggedCell>,
    pub flagged_sections: Vec<usize>,
    pub warnings: Vec<String>,
    pub doc_tokens: usize,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
}

/// Runs the full pipeline for one case, writing artifacts into `out_dir`.
///
/// With `resume`, stages whose artifacts already exist from an earlier run
/// over the same schema and table are reused instead of re-requested; any
/// input change restarts the case from scratch.
pub fn run_case(
    gateway: &Gateway,
    prompts: &PromptSet,
    cfg: &SynthesisConfig,
    inputs: &CaseInputs<'_>,
    out_dir: &Path,
    resume: bool,
) -> Result<SynthesisOutcome, SynthesisError> {
    let started_at = unix_ms();
    inputs.schema.validate()?;
    inputs.table.validate_against(inputs.schema)?;
    for (r, row) in inputs.table.rows().iter().enumerate() {
        if row[inputs.schema.key_attribute_index].is_none() {
            return Err(ModelError::InvalidTable(format!(
                "row {} has no key value; synthesis needs every entity named",
                r + 1
            ))
            .into());
        }
    }

    let working = out_dir.join(WORKING_DIR);
    std::fs::create_dir_all(&working)?;
    let fresh = Checkpoint::for_inputs(inputs.schema, inputs.table);
    let mut cp = match Checkpoint::load(out_dir) {
        Some(existing) if resume && existing.same_inputs(&fresh) => existing,
        _ => fresh,
    };
    cp.save(out_dir)?;
    bundle::write_json(&out_dir.join(SCHEMA_FILE), inputs.schema)?;
    bundle::write_json(&out_dir.join(TABLE_FILE), inputs.table)?;

    let mut calls_by_stage: BTreeMap<String, u32> = BTreeMap::new();
    let mut warnings: Vec<String> = Vec::new();

    // stages 1 + 2: capability matrix and evidence set; the matrix is an
    // on-disk artifact only, later stages work from the evidence
    let (_matrix, evidence, flagged_cells) = if let Some(external) = inputs.external_evidence {
        let (matrix, evidence) = fuse_external_evidence(inputs.schema, inputs.table, external)?;
        calls_by_stage.insert(STAGE_ANNOTATION.into(), 0);
        calls_by_stage.insert(STAGE_EVIDENCE.into(), 0);
        bundle::write_json(&out_dir.join(MATRIX_FILE), &matrix)?;
        bundle::write_json(&out_dir.join(EVIDENCE_FILE), &evidence)?;
        cp.mark(STAGE_ANNOTATION, out_dir)?;
        cp.mark(STAGE_EVIDENCE, out_dir)?;
        (matrix, evidence, Vec::new())
    } else {
        let annotation = match reuse::<AnnotationOutcome>(
            &cp,
            STAGE_ANNOTATION,
            &working.join(ANNOTATION_WORKING_FILE),
        ) {
            Some(a) => {
                calls_by_stage.insert(STAGE_ANNOTATION.into(), 0);
                a
            }
            None => {
                let a = annotation_loop(
                    gateway,
                    &cfg.models.annotator,
                    prompts,
                    inputs.schema,
                    inputs.table,
                    cfg.annotation_rounds,
                )?;
                bundle::write_json(&working.join(ANNOTATION_WORKING_FILE), &a)?;
                calls_by_stage.insert(STAGE_ANNOTATION.into(), a.calls);
                cp.mark(STAGE_ANNOTATION, out_dir)?;
                a
            }
        };
        if !annotation.fallback_cells.is_empty() {
            warnings.push(format!(
                "{} cells got no valid annotation and fell back to EMPTY",
                annotation.fallback_cells.len()
            ));
        }

        let stage = match reuse::<EvidenceOutcome>(
            &cp,
            STAGE_EVIDENCE,
            &working.join(EVIDENCE_WORKING_FILE),
        ) {
            Some(s) => {
                calls_by_stage.insert(STAGE_EVIDENCE.into(), 0);
                s
            }
            None => {
                let s = evidence_loop(
                    gateway,
                    &cfg.models.refiner,
                    &cfg.models.verifier,
                    prompts,
                    inputs.schema,
                    inputs.table,
                    &annotation.categories,
                    cfg.evidence_retries,
                )?;
                bundle::write_json(&working.join(EVIDENCE_WORKING_FILE), &s)?;
                bundle::write_json(&out_dir.join(MATRIX_FILE), &s.matrix)?;
                bundle::write_json(&out_dir.join(EVIDENCE_FILE), &s.evidence)?;
                calls_by_stage.insert(STAGE_EVIDENCE.into(), s.calls);
                cp.mark(STAGE_EVIDENCE, out_dir)?;
                s
            }
        };
        (stage.matrix, stage.evidence, stage.flagged)
    };
    for flag in &flagged_cells {
        warnings.push(format!(
            "cell ({},{}) downgraded to a direct statement: {}",
            flag.cell.row, flag.cell.col, flag.reason
        ));
    }

    // stage 3: plan
    let plan = match reuse::<WritingPlan>(&cp, STAGE_PLAN, &out_dir.join(PLAN_FILE)) {
        Some(p) => {
            calls_by_stage.insert(STAGE_PLAN.into(), 0);
            p
        }
        None => {
            let (p, calls) =
                plan_loop(gateway, &cfg.models.planner, prompts, &evidence, cfg.plan_retries)?;
            bundle::write_json(&out_dir.join(PLAN_FILE), &p)?;
            calls_by_stage.insert(STAGE_PLAN.into(), calls);
            cp.mark(STAGE_PLAN, out_dir)?;
            p
        }
    };

    // stage 4: write
    let written = match reuse::<WriteOutcome>(&cp, STAGE_WRITE, &working.join(SECTIONS_WORKING_FILE))
    {
        Some(w) => {
            calls_by_stage.insert(STAGE_WRITE.into(), 0);
            w
        }
        None => {
            let w = write_sections(
                gateway,
                &cfg.models.writer,
                &cfg.models.verifier,
                prompts,
                inputs.schema,
                inputs.table,
                &plan,
                &evidence,
                cfg.section_retries,
            )?;
            bundle::write_json(&working.join(SECTIONS_WORKING_FILE), &w)?;
            calls_by_stage.insert(STAGE_WRITE.into(), w.calls);
            cp.mark(STAGE_WRITE, out_dir)?;
            w
        }
    };
    for id in &written.flagged_sections {
        warnings.push(format!("section {id} kept an unverified draft"));
    }

    // stage 5: assemble, deterministic
    let assembled = assemble_case(&plan, written.sections, &evidence);
    warnings.extend(assembled.grounding_gaps.iter().cloned());
    let degraded = !flagged_cells.is_empty()
        || !written.flagged_sections.is_empty()
        || !assembled.grounding_gaps.is_empty();
    std::fs::write(out_dir.join(DOCUMENT_FILE), format!("{}\n", assembled.document.text))?;
    let provenance = bundle::Provenance {
        evidence_sections: assembled.evidence_sections,
        degraded,
        flagged_cells: flagged_cells.clone(),
        flagged_sections: written.flagged_sections.clone(),
        warnings: warnings.clone(),
    };
    bundle::write_json(&out_dir.join(PROVENANCE_FILE), &provenance)?;

    // optional judge pass; a bad judge response is a warning, not a failure
    let quality = if cfg.run_judge {
        match reuse::<QualityScores>(&cp, STAGE_JUDGE, &out_dir.join(QUALITY_FILE)) {
            Some(q) => {
                calls_by_stage.insert(STAGE_JUDGE.into(), 0);
                Some(q)
            }
            None => match judge_document(gateway, &cfg.models.judge, prompts, &assembled.document.text)
            {
                Ok((q, calls)) => {
                    bundle::write_json(&out_dir.join(QUALITY_FILE), &q)?;
                    calls_by_stage.insert(STAGE_JUDGE.into(), calls);
                    cp.mark(STAGE_JUDGE, out_dir)?;
                    Some(q)
                }
                Err(SynthesisError::StageOutput { detail, .. }) => {
                    warnings.push(format!("judge output unusable, no quality scores: {detail}"));
                    None
                }
                Err(other) => return Err(other),
            },
        }
    } else {
        None
    };

    let run_log = RunLog {
        case_id: inputs.case_id.to_string(),
        models: cfg.models.clone(),
        calls_by_stage: calls_by_stage.clone(),
        degraded,
        flagged_cells: flagged_cells.clone(),
        flagged_sections: written.flagged_sections.clone(),
        warnings: warnings.clone(),
        doc_tokens: assembled.document.token_count,
        started_at_unix_ms: started_at,
        finished_at_unix_ms: unix_ms(),
    };
    bundle::write_json(&out_dir.join(RUN_LOG_FILE), &run_log)?;

    Ok(SynthesisOutcome {
        case_id: inputs.case_id.to_string(),
        dir: out_dir.to_path_buf(),
        degraded,
        flagged_cells,
        flagged_sections: written.flagged_sections,
        calls_by_stage,
        quality,
        doc_tokens: assembled.document.token_count,
        warnings,
    })
}

/// One case in a batch run.
#[derive(Debug, Clone)]
pub struct CaseSpec {
    pub case_id: String,
    pub schema: Schema,
    pub table: Table,
    pub external_evidence: Option<Vec<EvidenceItem>>,
}

/// Synthesizes a batch of cases over a shared gateway, each into
/// `out_root/<case_id>`. Cases are distributed over `workers` threads;
/// results come back in input order.
pub fn run_cases(
    gateway: &Gateway,
    prompts: &PromptSet,
    cfg: &SynthesisConfig,
    cases: &[CaseSpec],
    out_root: &Path,
    resume: bool,
    workers: usize,
) -> Vec<(String, Result<SynthesisOutcome, SynthesisError>)> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<(String, Result<SynthesisOutcome, SynthesisError>)>>> =
        Mutex::new((0..cases.len()).map(|_| None).collect());
    let workers = workers.clamp(1, cases.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cases.len() {
                    break;
                }
                let case = &cases[i];
                let inputs = CaseInputs {
                    case_id: &case.case_id,
                    schema: &case.schema,
                    table: &case.table,
                    external_evidence: case.external_evidence.as_deref(),
                };
                let result =
                    run_case(gateway, prompts, cfg, &inputs, &out_root.join(&case.case_id), resume);
                results.lock().expect("no panics while holding the lock")[i] =
                    Some((case.case_id.clone(), result));
            });
        }
    });
    results
        .into_inner()
        .expect("worker threads joined")
        .into_iter()
        .map(|slot| slot.expect("every case index was processed"))
        .collect()
}

/// Builds the matrix and final evidence set from user-supplied evidence.
///
/// Labels derive from the items: a cell with refined evidence takes its
/// sub-capability, a cell with plain evidence is direct, an uncovered cell
/// with a value gets an auto-generated canonical statement, and a missing
/// cell is labeled missing-value faithfulness with no evidence.
fn fuse_external_evidence(
    schema: &Schema,
    table: &Table,
    external: &[EvidenceItem],
) -> Result<(CapabilityMatrix, Vec<EvidenceItem>), SynthesisError> {
    crate::model::validate_evidence_set(external, table)?;
    let mut evidence: Vec<EvidenceItem> = external.to_vec();
    let used: BTreeSet<String> = evidence.iter().map(|e| e.id.clone()).collect();
    let mut next_fill = 1usize;
    let mut labels: Vec<Vec<CapabilityLabel>> = Vec::with_capacity(table.n_rows());
    for (r, row) in table.rows().iter().enumerate() {
        let entity = render::entity_name(table, schema.key_attribute_index, r);
        let mut label_row = Vec::with_capacity(row.len());
        for (c, cell) in row.iter().enumerate() {
            let label = match cell {
                None => CapabilityLabel::from_sub(SubCapability::MissingValueFaithfulness),
                Some(value) => {
                    let covering: Vec<&EvidenceItem> = external
                        .iter()
                        .filter(|e| e.cell.row == r && e.cell.col == c)
                        .collect();
                    if covering.is_empty() {
                        let mut id = format!("f{next_fill}");
                        while used.contains(&id) {
                            next_fill += 1;
                            id = format!("f{next_fill}");
                        }
                        next_fill += 1;
                        evidence.push(EvidenceItem {
                            id,
                            cell: crate::model::CellRef { row: r, col: c },
                            sub_capability: None,
                            fragments: vec![canonical_evidence(
                                &entity,
                                &schema.attributes[c].name,
                                Some(value),
                            )?],
                        });
                        CapabilityLabel::empty()
                    } else {
                        match covering.iter().find_map(|e| e.sub_capability) {
                            Some(sub) => CapabilityLabel::from_sub(sub),
                            None => CapabilityLabel::empty(),
                        }
                    }
                }
            };
            label_row.push(label);
        }
        labels.push(label_row);
    }
    Ok((CapabilityMatrix::new(labels)?, evidence))
}

fn reuse<T: DeserializeOwned>(cp: &Checkpoint, stage: &str, path: &Path) -> Option<T> {
    if cp.done(stage) {
        bundle::read_json(path).ok()
    } else {
        None
    }
}

fn unix_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}
