use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use super::{
    feature_name, unique_name, AcceptedFeature, Approval, CandidateFeature, CandidateSpec, PipelineConfig,
    PipelineError, PipelineReport, PreviewRow, Rejection, RowCompletionDecision, RowCompletionRequest,
    SourceSuggestionRecord,
};
use crate::agenda::{AgendaError, DataAgenda};
use crate::dsl::{apply_node, canonical_key, typecheck, Extractor, OperatorKind, PlanNode, TransformExpr, TransformPlan};
use crate::llm::{
    parse_function_output, parse_row_value, parse_sampled_candidate, parse_unary_proposals, render_function_prompt,
    render_prompt, render_row_prompt, CompletionRequest, GenerationError, GenerationOutcome, PromptContext, Provider,
    ProviderError, Role, GENERATOR_TEMPERATURE, PROPOSAL_TEMPERATURE, SAMPLING_TEMPERATURE,
};
use crate::select::select_features;
use crate::table::Table;

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub table: Table,
    pub agenda: DataAgenda,
    pub plan: TransformPlan,
    pub report: PipelineReport,
}

/// A provider failure that ends the run.
struct Abort(ProviderError);

enum CallFailure {
    Counted(GenerationError),
    Abort(ProviderError),
}

impl From<CallFailure> for Result<GenerationError, Abort> {
    fn from(f: CallFailure) -> Self {
        match f {
            CallFailure::Counted(e) => Ok(e),
            CallFailure::Abort(e) => Err(Abort(e)),
        }
    }
}

struct Run<'a> {
    provider: &'a dyn Provider,
    config: &'a PipelineConfig,
    approval: &'a dyn Approval,
    table: Table,
    agenda: DataAgenda,
    plan: TransformPlan,
    report: PipelineReport,
    /// Canonical keys of candidates and expressions seen so far.
    seen: HashSet<String>,
    calls: AtomicUsize,
}

fn parallel_map<T: Sync, R: Send>(items: &[T], bound: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if bound <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(bound) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|item| s.spawn(move || f(item))).collect();
            for h in handles {
                out.push(h.join().expect("proposal worker panicked"));
            }
        });
    }
    out
}

/// One provider call with a single retry on transient failures.
fn call_with_retry(
    provider: &dyn Provider,
    calls: &AtomicUsize,
    role: Role,
    prompt: &str,
    temperature: f64,
) -> Result<String, CallFailure> {
    let request = CompletionRequest::new(role, prompt, temperature);
    let mut retried = false;
    loop {
        calls.fetch_add(1, Ordering::Relaxed);
        match provider.complete(&request) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_transient() && !retried => {
                log::warn!("transient provider failure, retrying: {e}");
                retried = true;
            }
            Err(e) if e.is_transient() => return Err(CallFailure::Counted(GenerationError::Provider(e.to_string()))),
            Err(e) => return Err(CallFailure::Abort(e)),
        }
    }
}

impl Run<'_> {
    fn call(&self, role: Role, prompt: &str, temperature: f64) -> Result<String, CallFailure> {
        call_with_retry(self.provider, &self.calls, role, prompt, temperature)
    }

    fn ctx(&self, kind: OperatorKind, focus: Option<&'_ str>) -> Result<String, GenerationError> {
        render_prompt(&PromptContext {
            agenda: &self.agenda,
            kind,
            focus,
            reference_year: Some(self.config.reference_year),
        })
        .map_err(|e| GenerationError::Prompt(e.to_string()))
    }

    fn name_taken(&self, name: &str, pending: &[CandidateFeature]) -> bool {
        self.table.contains(name)
            || self.plan.nodes().iter().any(|n| n.name == name)
            || pending.iter().any(|c| c.name == name)
    }

    fn reject(&mut self, c: &CandidateFeature, category: &str, reason: String) {
        log::info!("rejected {}: {reason}", c.name);
        self.report.rejected.push(Rejection {
            name: c.name.clone(),
            kind: c.kind,
            category: category.to_string(),
            reason,
        });
    }

    fn reject_error(&mut self, c: &CandidateFeature, e: GenerationError) {
        self.report.count_error(c.kind, &e);
        self.reject(c, e.category(), e.to_string());
    }

    fn unary_phase(&mut self) -> Result<(), Abort> {
        let columns: Vec<String> = self
            .agenda
            .features
            .iter()
            .filter(|f| f.derived.is_none())
            .map(|f| f.name.clone())
            .collect();
        let prompts: Vec<Result<String, GenerationError>> =
            columns.iter().map(|c| self.ctx(OperatorKind::Unary, Some(c))).collect();
        let (provider, calls) = (self.provider, &self.calls);
        let responses = parallel_map(&prompts, self.config.parallelism, |p| match p {
            Ok(p) => call_with_retry(provider, calls, Role::Selector, p, PROPOSAL_TEMPERATURE),
            Err(e) => Err(CallFailure::Counted(e.clone())),
        });

        let mut candidates: Vec<CandidateFeature> = Vec::new();
        for (col, response) in columns.iter().zip(responses) {
            let text = match response {
                Ok(t) => t,
                Err(f) => {
                    let e = Result::<GenerationError, Abort>::from(f)?;
                    self.report.count_error(OperatorKind::Unary, &e);
                    continue;
                }
            };
            let set = match parse_unary_proposals(&text, col) {
                Ok(s) => s,
                Err(e) => {
                    self.report.count_error(OperatorKind::Unary, &e);
                    continue;
                }
            };
            self.report.proposal_warnings += set.warnings;
            for p in set.proposals {
                if p.confidence < self.config.confidence_cutoff {
                    self.report.below_cutoff += 1;
                    continue;
                }
                let base = feature_name(OperatorKind::Unary, &[p.op.label(), col]);
                let name = unique_name(&base, |n| self.name_taken(n, &candidates));
                let description = if p.description.is_empty() {
                    format!("{} of {col}", p.op.label())
                } else {
                    p.description
                };
                let c = CandidateFeature {
                    name,
                    relevant_columns: vec![col.clone()],
                    description,
                    kind: OperatorKind::Unary,
                    spec: CandidateSpec::Unary {
                        op: p.op,
                        confidence: p.confidence,
                    },
                };
                self.seen.insert(c.canonical_key());
                candidates.push(c);
            }
        }
        for c in candidates {
            self.realize(c)?;
        }
        Ok(())
    }

    fn sampled_phase(&mut self, kind: OperatorKind) -> Result<(), Abort> {
        let budget = self.config.budget.for_kind(kind);
        let stats = self.report.sampling.entry(kind).or_default();
        stats.budget = budget;
        if budget == 0 {
            return Ok(());
        }
        let prompt = match self.ctx(kind, None) {
            Ok(p) => p,
            Err(e) => {
                self.report.count_error(kind, &e);
                return Ok(());
            }
        };
        let mut candidates: Vec<CandidateFeature> = Vec::new();
        let mut consecutive = 0usize;
        let mut attempts = 0usize;
        while candidates.len() < budget && consecutive < self.config.error_threshold {
            attempts += 1;
            let parsed = match self.call(Role::Selector, &prompt, SAMPLING_TEMPERATURE) {
                Ok(text) => parse_sampled_candidate(&text, kind, &self.agenda),
                Err(f) => Err(Result::<GenerationError, Abort>::from(f)?),
            };
            match parsed {
                Err(e) => {
                    self.report.count_error(kind, &e);
                    consecutive += 1;
                }
                Ok(mut c) => {
                    let key = c.canonical_key();
                    if !self.seen.insert(key) {
                        let e = GenerationError::Duplicate(c.name.clone());
                        self.reject_error(&c, e);
                        consecutive += 1;
                        continue;
                    }
                    c.name = unique_name(&c.name, |n| self.name_taken(n, &candidates));
                    candidates.push(c);
                    consecutive = 0;
                }
            }
        }
        let stats = self.report.sampling.entry(kind).or_default();
        stats.attempts += attempts;
        stats.candidates += candidates.len();
        stats.stopped_early |= consecutive >= self.config.error_threshold;
        for c in candidates {
            self.realize(c)?;
        }
        Ok(())
    }

    /// Generates the function for an accepted candidate and materializes it.
    fn realize(&mut self, c: CandidateFeature) -> Result<(), Abort> {
        let outcome = match self.generate_function(&c) {
            Ok(o) => o,
            Err(f) => {
                let e = Result::<GenerationError, Abort>::from(f)?;
                self.reject_error(&c, e);
                return Ok(());
            }
        };
        match outcome {
            GenerationOutcome::Function(expr) => {
                if let Err(e) = self.materialize_function(&c, expr) {
                    self.reject_error(&c, e);
                }
            }
            GenerationOutcome::RowCompletion {
                preview,
                estimated_calls,
            } => self.row_completion(&c, preview, estimated_calls)?,
            GenerationOutcome::SourceSuggestion(text) => {
                self.report.source_suggestions.push(SourceSuggestionRecord {
                    feature: c.name.clone(),
                    suggestion: text.clone(),
                });
                self.reject(&c, "source_suggestion", text);
            }
        }
        Ok(())
    }

    fn generate_function(&self, c: &CandidateFeature) -> Result<GenerationOutcome, CallFailure> {
        if let (OperatorKind::HighOrder, CandidateSpec::Expr { expr }) = (c.kind, &c.spec) {
            return Ok(GenerationOutcome::Function(expr.clone()));
        }
        let prompt = render_function_prompt(&self.agenda, c, Some(self.config.reference_year));
        let text = self.call(Role::Generator, &prompt, GENERATOR_TEMPERATURE)?;
        match parse_function_output(&text).map_err(CallFailure::Counted)? {
            GenerationOutcome::RowCompletion { .. } => {
                let n = self.table.n_rows();
                let mut preview = Vec::new();
                if self.approval.enabled() {
                    for row in 0..self.config.preview_examples.min(n) {
                        let serialized = self.table.serialize_row(row, &c.name).expect("row in range");
                        let answer = self.call(
                            Role::Generator,
                            &render_row_prompt(&serialized, &c.name, &c.description),
                            GENERATOR_TEMPERATURE,
                        )?;
                        preview.push((serialized, answer.trim().to_string()));
                    }
                }
                Ok(GenerationOutcome::RowCompletion {
                    preview,
                    estimated_calls: n,
                })
            }
            other => Ok(other),
        }
    }

    fn materialize_function(&mut self, c: &CandidateFeature, expr: TransformExpr) -> Result<(), GenerationError> {
        if let Some(col) = expr.columns().into_iter().find(|col| !c.relevant_columns.iter().any(|r| r == col)) {
            return Err(GenerationError::InvalidExpr(format!(
                "reads `{col}`, which is not among the relevant columns"
            )));
        }
        typecheck(&expr, &self.table.schema())?;
        let key = canonical_key(&expr);
        if self.seen.contains(&key) && !matches!(c.spec, CandidateSpec::Expr { .. }) {
            return Err(GenerationError::Duplicate(c.name.clone()));
        }
        let node = PlanNode {
            name: c.name.clone(),
            description: c.description.clone(),
            relevant_columns: c.relevant_columns.clone(),
            operator_kind: c.kind,
            expr,
        };
        let table = apply_node(&self.table, &node, self.plan.len())?;
        let produced: Vec<String> = table.names().skip(self.table.n_cols()).map(str::to_string).collect();
        let all_null = produced.is_empty()
            || produced
                .iter()
                .any(|p| table.n_rows() > 0 && table.column(p).is_some_and(|col| col.null_count() == table.n_rows()));
        if all_null {
            return Err(GenerationError::AllNull(c.name.clone()));
        }
        self.plan.push(node)?;
        self.seen.insert(key);
        for p in &produced {
            let meta = table.meta(p).expect("just added");
            let description = match p.strip_prefix(&format!("{}=", c.name)) {
                Some(value) => format!("{} (= {value})", c.description),
                None => c.description.clone(),
            };
            self.agenda.push(p.clone(), meta.dtype, description, c.kind);
        }
        self.table = table;
        log::info!("accepted {} ({} columns)", c.name, produced.len());
        self.report.accepted.push(AcceptedFeature {
            name: c.name.clone(),
            kind: c.kind,
            description: c.description.clone(),
            relevant_columns: c.relevant_columns.clone(),
            columns: produced,
        });
        Ok(())
    }

    fn row_completion(
        &mut self,
        c: &CandidateFeature,
        preview: Vec<(String, String)>,
        estimated_calls: usize,
    ) -> Result<(), Abort> {
        let preview_rows = || {
            preview
                .iter()
                .map(|(row, value)| PreviewRow {
                    row: row.clone(),
                    value: value.clone(),
                })
                .collect::<Vec<_>>()
        };
        let mut decision = RowCompletionDecision {
            feature: c.name.clone(),
            approved: false,
            estimated_calls,
            preview: preview_rows(),
            note: String::new(),
        };
        if !self.approval.enabled() {
            decision.note = "skipped: completions disabled".into();
            self.report.row_completions.push(decision);
            self.reject(c, "row_completion_skipped", "row completions disabled".into());
            return Ok(());
        }
        let request = RowCompletionRequest {
            feature: &c.name,
            description: &c.description,
            preview: &preview,
            estimated_calls,
        };
        if !self.approval.approve(&request) {
            decision.note = "skipped: cost".into();
            self.report.row_completions.push(decision);
            self.reject(c, "row_completion_skipped", "skipped: cost".into());
            return Ok(());
        }
        decision.approved = true;

        let key_col = c.relevant_columns[0].clone();
        let Some(keys) = self.table.column(&key_col).map(|col| col.keys()) else {
            decision.note = format!("key column `{key_col}` missing");
            self.report.row_completions.push(decision);
            self.reject_error(c, GenerationError::UnknownColumn(key_col));
            return Ok(());
        };
        let mut map = BTreeMap::new();
        let mut calls = 0usize;
        for (row, key) in keys.iter().enumerate() {
            let answer = match preview.get(row) {
                Some((_, a)) => a.clone(),
                None => {
                    let serialized = self.table.serialize_row(row, &c.name).expect("row in range");
                    calls += 1;
                    match self.call(
                        Role::Generator,
                        &render_row_prompt(&serialized, &c.name, &c.description),
                        GENERATOR_TEMPERATURE,
                    ) {
                        Ok(a) => a,
                        Err(CallFailure::Counted(e)) => {
                            self.report.count_error(c.kind, &e);
                            continue;
                        }
                        Err(CallFailure::Abort(e)) => {
                            decision.note = format!("aborted after {calls} calls");
                            self.report.row_completions.push(decision);
                            return Err(Abort(e));
                        }
                    }
                }
            };
            if let (Some(k), Some(v)) = (key, parse_row_value(&answer)) {
                map.entry(k.clone()).or_insert(v);
            }
        }
        decision.note = format!("completed: {} rows, {} values", keys.len(), map.len());
        self.report.row_completions.push(decision);
        let expr = TransformExpr::Extractor(Extractor::LookupMap {
            key_col,
            map,
            default: None,
        });
        if let Err(e) = self.materialize_function(c, expr) {
            self.reject_error(c, e);
        }
        Ok(())
    }
}

/// Runs the unary phase and then `sweeps` rounds of binary, high-order and
/// extractor sampling. Every accepted feature is added to the table and the
/// agenda before the next phase. A fatal provider error stops the run; what
/// was accepted so far is returned and `report.aborted` says why.
pub fn run_pipeline(
    table: &Table,
    agenda: &DataAgenda,
    config: &PipelineConfig,
    provider: &dyn Provider,
    approval: &dyn Approval,
) -> Result<PipelineOutcome, PipelineError> {
    config.validate()?;
    agenda.validate()?;
    let target = agenda.target().to_string();
    let table = table.clone().with_target(&target)?;
    if let Some(f) = agenda.features.iter().find(|f| !table.contains(&f.name)) {
        return Err(AgendaError::Inconsistent(format!("agenda feature `{}` is not a column", f.name)).into());
    }
    let agenda = agenda.aligned_with(&table);

    let mut run = Run {
        provider,
        config,
        approval,
        table,
        agenda,
        plan: TransformPlan::new(),
        report: PipelineReport::default(),
        seen: HashSet::new(),
        calls: AtomicUsize::new(0),
    };
    let mut timings = BTreeMap::new();
    let result = (|| {
        let t = Instant::now();
        run.unary_phase()?;
        timings.insert("unary".to_string(), t.elapsed().as_millis() as u64);
        for _ in 0..config.sweeps {
            for kind in OperatorKind::SAMPLED {
                let t = Instant::now();
                run.sampled_phase(kind)?;
                *timings.entry(kind.as_str().to_string()).or_insert(0) += t.elapsed().as_millis() as u64;
            }
        }
        Ok::<(), Abort>(())
    })();
    if let Err(Abort(e)) = result {
        log::error!("provider failure, stopping: {e}");
        run.report.aborted = Some(e.to_string());
    }
    run.report.fm_calls = run.calls.load(Ordering::Relaxed);
    if config.record_timings {
        run.report.timings_ms = Some(timings);
    }
    debug_assert!(run.agenda.check_consistent(&run.table).is_ok());
    Ok(PipelineOutcome {
        table: run.table,
        agenda: run.agenda,
        plan: run.plan,
        report: run.report,
    })
}

/// Removes every original attribute that some accepted unary feature derives
/// from and that no non-unary feature reads. The target is never removed.
pub fn drop_originals(plan: &TransformPlan, table: &Table, agenda: &DataAgenda) -> (Table, DataAgenda, Vec<String>) {
    let dropped: Vec<String> = table
        .names()
        .filter(|n| Some(*n) != table.target() && !plan.is_derived(n))
        .filter(|a| {
            let uses = |unary: bool| {
                plan.nodes().iter().any(|n| {
                    (n.operator_kind == OperatorKind::Unary) == unary && n.relevant_columns.iter().any(|r| r == a)
                })
            };
            uses(true) && !uses(false)
        })
        .map(str::to_string)
        .collect();
    let mut agenda = agenda.clone();
    agenda.remove(&dropped);
    (table.drop_columns(&dropped), agenda, dropped)
}

/// The full generation command: [`run_pipeline`], then [`drop_originals`],
/// then feature selection. Removed columns are recorded in the plan so that
/// applying it reproduces the returned table.
pub fn generate(
    table: &Table,
    agenda: &DataAgenda,
    config: &PipelineConfig,
    provider: &dyn Provider,
    approval: &dyn Approval,
) -> Result<PipelineOutcome, PipelineError> {
    let mut out = run_pipeline(table, agenda, config, provider, approval)?;
    let (t, a, dropped) = drop_originals(&out.plan, &out.table, &out.agenda);
    out.plan.add_dropped(dropped.clone());
    out.report.dropped_originals = dropped;
    let (t, selection) = select_features(&t, &out.plan, &config.thresholds);
    let removed = selection.removed_names();
    out.plan.add_dropped(removed.clone());
    let mut a = a;
    a.remove(&removed);
    out.report.selection = Some(selection);
    out.table = t;
    out.agenda = a;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::dsl::{AggFn, Operand, BinaryOp};
    use crate::llm::FnProvider;
    use crate::pipeline::{AutoApprove, AutoDeny, Budgets, NoCompletions};
    use crate::table::Column;
    use std::sync::Mutex;

    fn num(v: &[f64]) -> Column {
        Column::Numeric(v.iter().map(|x| Some(*x)).collect())
    }

    fn script<F>(f: F) -> FnProvider<impl Fn(&CompletionRequest) -> Result<String, ProviderError> + Send + Sync>
    where
        F: Fn(&CompletionRequest) -> String + Send + Sync,
    {
        FnProvider(move |r: &CompletionRequest| Ok(f(r)))
    }

    fn is_sampling(r: &CompletionRequest, kind: &str) -> bool {
        r.role == Role::Selector && r.prompt.contains(&format!("Sample one {kind}"))
    }

    #[test]
    fn insurance_f1_to_f3() {
        let provider = demo::insurance_provider();
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        let t = &out.table;
        assert_eq!(t.column("Bucketize_Age").unwrap(), &num(&[1.0, 1.0, 2.0, 1.0, 2.0, 2.0]));
        assert_eq!(
            t.column("Sub_2023_Age_of_car").unwrap(),
            &num(&[2017.0, 2021.0, 2015.0, 2009.0, 2020.0, 2018.0])
        );
        assert_eq!(
            t.column("GroupBy_City_mean_Claim_in_last_6_month").unwrap(),
            &num(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
        );
        assert_eq!(out.report.accepted.len(), 3);
        assert!(out.report.aborted.is_none());
        assert_eq!(out.report.source_suggestions.len(), 1);
        assert_eq!(out.report.row_completions[0].note, "skipped: completions disabled");
        assert!(out.agenda.check_consistent(&out.table).is_ok());
        // accepted + rejected = parsed candidates
        let parsed = 1 + out.report.sampling.values().map(|s| s.candidates).sum::<usize>()
            + out.report.errors.values().flat_map(|e| e.by_category.get("duplicate")).sum::<usize>();
        assert_eq!(out.report.accepted.len() + out.report.rejected.len(), parsed);
    }

    #[test]
    fn insurance_row_completion_approved() {
        let provider = demo::insurance_provider();
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &AutoApprove,
        )
        .unwrap();
        let d = &out.report.row_completions[0];
        assert!(d.approved);
        assert_eq!(d.preview.len(), 3);
        assert_eq!(d.estimated_calls, 6);
        let col = out.table.column("Ex_external_City").unwrap();
        assert_eq!(col, &num(&[7200.0, 3200.0, 3600.0, 7200.0, 3600.0, 3200.0]));
    }

    #[test]
    fn denied_completion_leaves_table() {
        let provider = demo::insurance_provider();
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &AutoDeny,
        )
        .unwrap();
        let d = &out.report.row_completions[0];
        assert!(!d.approved);
        assert_eq!(d.note, "skipped: cost");
        assert_eq!(d.preview.len(), 3);
        assert!(!out.table.contains("Ex_external_City"));
    }

    #[test]
    fn zero_budget_runs_only_unary() {
        let provider = demo::insurance_provider();
        let config = PipelineConfig {
            budget: Budgets::uniform(0),
            ..Default::default()
        };
        let out = run_pipeline(&demo::insurance_table(), &demo::insurance_agenda(), &config, &provider, &NoCompletions)
            .unwrap();
        assert_eq!(out.report.accepted_names(), vec!["Bucketize_Age"]);
        assert!(out.report.sampling.values().all(|s| s.attempts == 0));
    }

    #[test]
    fn high_order_needs_no_generator_call() {
        let generator_calls = AtomicUsize::new(0);
        let provider = script(|r| {
            if r.role == Role::Generator {
                generator_calls.fetch_add(1, Ordering::SeqCst);
                return "SOURCE: nothing".into();
            }
            if is_sampling(r, "high-order") {
                r#"{groupby_col:[City], agg_col:"Claim in last 6 month", function:mean}"#.into()
            } else {
                "nothing useful".into()
            }
        });
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        assert_eq!(out.report.accepted_names(), vec!["GroupBy_City_mean_Claim_in_last_6_month"]);
        assert_eq!(generator_calls.load(Ordering::SeqCst), 0);
        assert_eq!(out.table.n_cols(), 8);
        assert_eq!(out.agenda.features.len(), 7);
        // second identical spec is a duplicate: 1 accepted then 5 consecutive repeats
        let stats = &out.report.sampling[&OperatorKind::HighOrder];
        assert_eq!(stats.attempts, 6);
        assert!(stats.stopped_early);
        assert_eq!(out.report.errors[&OperatorKind::HighOrder].by_category["duplicate"], 5);
    }

    #[test]
    fn budget_met_exactly() {
        let n = Mutex::new(0usize);
        let funcs = ["mean", "max", "min", "sum", "count", "std"];
        let provider = script(|r| {
            if is_sampling(r, "high-order") {
                let mut i = n.lock().unwrap();
                let (g, a) = (["City", "Sex"][*i % 2], ["Age", "Age of car"][(*i / 2) % 2]);
                let f = funcs[(*i / 4) % 6];
                *i += 1;
                format!("{{groupby_col:[{g}], agg_col:\"{a}\", function:{f}}}")
            } else {
                "nothing".into()
            }
        });
        let config = PipelineConfig {
            budget: Budgets::uniform(10),
            ..Default::default()
        };
        let out = run_pipeline(&demo::insurance_table(), &demo::insurance_agenda(), &config, &provider, &NoCompletions)
            .unwrap();
        assert_eq!(out.report.sampling[&OperatorKind::HighOrder].candidates, 10);
        assert_eq!(out.report.sampling[&OperatorKind::HighOrder].attempts, 10);
    }

    #[test]
    fn malformed_samples_stop_at_threshold() {
        let provider = script(|r| if is_sampling(r, "binary") { "???".into() } else { "nothing".into() });
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        let s = &out.report.sampling[&OperatorKind::Binary];
        assert_eq!((s.attempts, s.candidates, s.stopped_early), (5, 0, true));
    }

    #[test]
    fn extractor_type_error_is_generation_error() {
        let provider = script(|r| {
            if is_sampling(r, "extractor") {
                r#"{kind: weighted_sum, columns: [Age, City], description: "risk"}"#.into()
            } else if r.role == Role::Generator {
                r#"FUNCTION {kind: weighted_sum, weights: {Age: 0.5, City: 0.5}}"#.into()
            } else {
                "nothing".into()
            }
        });
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        assert!(out.report.accepted.is_empty());
        let r = out.report.rejected.iter().find(|r| r.category != "duplicate").unwrap();
        assert_eq!(r.category, "invalid_expression");
        assert_eq!(out.report.errors[&OperatorKind::Extractor].by_category["invalid_expression"], 1);
    }

    #[test]
    fn function_outside_relevant_columns_rejected() {
        let provider = script(|r| {
            if is_sampling(r, "binary") {
                r#"{op: sub, lhs: 2023, rhs: "Age of car"}"#.into()
            } else if r.role == Role::Generator {
                r#"FUNCTION {kind: sub, lhs: 2023, rhs: Age}"#.into()
            } else {
                "nothing".into()
            }
        });
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        assert!(out.report.accepted.is_empty());
    }

    #[test]
    fn fatal_provider_error_keeps_partial_plan() {
        let provider = FnProvider(|r: &CompletionRequest| {
            if is_sampling(r, "binary") {
                Err(ProviderError::Status {
                    status: 401,
                    body: "bad key".into(),
                })
            } else {
                demo::insurance_response(r)
            }
        });
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        assert_eq!(out.report.accepted_names(), vec!["Bucketize_Age"]);
        assert!(out.report.aborted.as_deref().unwrap().contains("401"));
        assert_eq!(out.plan.len(), 1);
    }

    #[test]
    fn transient_errors_retry_once_then_count() {
        let attempts = AtomicUsize::new(0);
        let provider = FnProvider(|r: &CompletionRequest| {
            if is_sampling(r, "binary") {
                let n = attempts.fetch_add(1, Ordering::SeqCst);
                if n.is_multiple_of(3) {
                    return Err(ProviderError::Timeout(1));
                }
                if n % 3 == 1 {
                    return Ok(r#"{op: sub, lhs: 2023, rhs: "Age of car"}"#.to_string());
                }
                return Err(ProviderError::Transport("reset".into()));
            }
            demo::insurance_response(r)
        });
        let config = PipelineConfig {
            budget: Budgets {
                binary: 10,
                high_order: 0,
                extractor: 0,
            },
            ..Default::default()
        };
        let out = run_pipeline(&demo::insurance_table(), &demo::insurance_agenda(), &config, &provider, &NoCompletions)
            .unwrap();
        assert!(out.report.aborted.is_none());
        assert!(out.report.accepted_names().contains(&"Sub_2023_Age_of_car"));
        assert!(out.report.errors[&OperatorKind::Binary].by_category.contains_key("provider"));
    }

    #[test]
    fn drop_heuristic_cases() {
        let t = demo::insurance_table();
        let a = demo::insurance_agenda();
        let bucket = PlanNode {
            name: "Bucketize_Age".into(),
            description: String::new(),
            relevant_columns: vec!["Age".into()],
            operator_kind: OperatorKind::Unary,
            expr: crate::dsl::parse_expr(r#"{kind: bucketize, col: Age, boundaries: [0, 21, 40, 60, 120]}"#).unwrap(),
        };
        let plan = TransformPlan::from_nodes(vec![bucket.clone()], vec![]).unwrap();
        let enriched = plan.apply(&t).unwrap();
        let (t2, a2, dropped) = drop_originals(&plan, &enriched, &a);
        assert_eq!(dropped, vec!["Age"]);
        assert!(!t2.contains("Age") && a2.feature("Age").is_none());

        let groupby = PlanNode {
            name: "GroupBy_City_mean_Age".into(),
            description: String::new(),
            relevant_columns: vec!["City".into(), "Age".into()],
            operator_kind: OperatorKind::HighOrder,
            expr: TransformExpr::GroupbyAgg {
                group_cols: vec!["City".into()],
                agg_col: "Age".into(),
                func: AggFn::Mean,
            },
        };
        let plan = TransformPlan::from_nodes(vec![bucket, groupby], vec![]).unwrap();
        let (_, _, dropped) = drop_originals(&plan, &plan.apply(&t).unwrap(), &a);
        assert!(dropped.is_empty());

        let sub = PlanNode {
            name: "Sub_2023_Age_of_car".into(),
            description: String::new(),
            relevant_columns: vec!["Age of car".into()],
            operator_kind: OperatorKind::Binary,
            expr: TransformExpr::Binary {
                op: BinaryOp::Sub,
                lhs: Operand::Lit(2023.0),
                rhs: Operand::Col("Age of car".into()),
            },
        };
        let plan = TransformPlan::from_nodes(vec![sub], vec![]).unwrap();
        let (_, _, dropped) = drop_originals(&plan, &plan.apply(&t).unwrap(), &a);
        assert!(dropped.is_empty());
    }

    #[test]
    fn generate_then_apply_reproduces_table() {
        let provider = demo::insurance_provider();
        let out = generate(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &AutoApprove,
        )
        .unwrap();
        assert_eq!(out.report.dropped_originals, vec!["Age"]);
        let again = out.plan.apply(&demo::insurance_table().with_target("Safe").unwrap()).unwrap();
        assert_eq!(
            crate::table::write_csv_string(&again),
            crate::table::write_csv_string(&out.table)
        );
    }

    #[test]
    fn missing_agenda_fields_rejected() {
        let mut a = demo::insurance_agenda();
        a.prediction_class.name.clear();
        let err = run_pipeline(
            &demo::insurance_table(),
            &a,
            &PipelineConfig::default(),
            &demo::insurance_provider(),
            &NoCompletions,
        )
        .unwrap_err();
        assert!(err.to_string().contains("prediction_class.name"));
    }

    #[test]
    fn dedup_alternating() {
        let n = AtomicUsize::new(0);
        let provider = script(|r| {
            if is_sampling(r, "high-order") {
                let i = n.fetch_add(1, Ordering::SeqCst);
                // valid, duplicate, valid, duplicate, ... over 4 distinct specs
                let f = ["mean", "max", "min", "sum"][(i / 2) % 4];
                format!("{{groupby_col:[City], agg_col:Age, function:{f}}}")
            } else {
                "nothing".into()
            }
        });
        let out = run_pipeline(
            &demo::insurance_table(),
            &demo::insurance_agenda(),
            &PipelineConfig::default(),
            &provider,
            &NoCompletions,
        )
        .unwrap();
        assert_eq!(out.report.sampling[&OperatorKind::HighOrder].candidates, 4);
        assert_eq!(out.report.accepted.len(), 4);
    }
}
