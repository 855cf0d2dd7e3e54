use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::knowledge::{derivable, missing_subterm, saturate, Context};
use crate::diagnostic::{Code, Diagnostic, Location};
use crate::model::{
    subterms, Bundle, Delivery, KeyKind, Orientation, ProtocolSpec, SecurityGoal, Site, Term,
};

/// Saturated knowledge of one role right after message `at_step`
/// (0 = before the first message).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeState {
    pub role: String,
    pub at_step: usize,
    pub known: BTreeSet<Term>,
}

impl KnowledgeState {
    /// Known terms in canonical order.
    pub fn sorted(&self) -> Vec<&Term> {
        let mut v: Vec<&Term> = self.known.iter().collect();
        v.sort_by(|a, b| a.canonical_cmp(b));
        v
    }
}

impl Serialize for KnowledgeState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let known: Vec<String> = self.sorted().iter().map(|t| t.to_string()).collect();
        let mut st = s.serialize_struct("KnowledgeState", 3)?;
        st.serialize_field("role", &self.role)?;
        st.serialize_field("atStep", &self.at_step)?;
        st.serialize_field("known", &known)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StepViolation {
    pub step_index: usize,
    pub role: String,
    pub code: Code,
    #[serde(serialize_with = "display")]
    pub missing_term: Term,
    pub explanation: String,
}

fn display<S: Serializer>(t: &Term, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_string())
}

impl StepViolation {
    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::error(self.code, self.explanation.clone()).in_step(Some(self.step_index))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExecutabilityReport {
    pub ok: bool,
    pub violations: Vec<StepViolation>,
    pub final_knowledge: BTreeMap<String, KnowledgeState>,
}

/// Knowledge of every role after every step, plus the violations found on
/// the way.
#[derive(Debug, Clone)]
pub struct Trace {
    pub states: BTreeMap<String, Vec<KnowledgeState>>,
    pub violations: Vec<StepViolation>,
}

/// Initial knowledge of `role`: its own declarations, every public term of
/// the specification and, with an asymmetric bundle, every role's public key.
pub fn initial_knowledge(spec: &ProtocolSpec, role: &str) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    let Some(r) = spec.role(role) else {
        return out;
    };
    out.extend(r.initial_knowledge.iter().cloned());
    out.extend(r.fresh_values.iter().cloned().map(Term::Var));
    out.extend(r.long_term_keys.iter().map(|k| Term::Var(k.var.clone())));
    out.extend(spec.public_terms());
    out.extend(public_keys(spec));
    out
}

fn public_keys(spec: &ProtocolSpec) -> Vec<Term> {
    let keyed = spec.bundles().contains(&Bundle::AsymmetricEncryption)
        || spec.bundles().contains(&Bundle::Signing);
    let Some(pk) = spec.signature().get("pk").cloned().filter(|_| keyed) else {
        return Vec::new();
    };
    spec.roles()
        .iter()
        .flat_map(|r| &r.long_term_keys)
        .filter(|k| k.kind == KeyKind::AsymmetricPrivate)
        .filter_map(|k| Term::apply(&pk, vec![Term::Var(k.var.clone())]).ok())
        .collect()
}

pub fn trace(spec: &ProtocolSpec) -> Trace {
    let ctx = Context::for_spec(spec);
    let mut states: BTreeMap<String, Vec<KnowledgeState>> = BTreeMap::new();
    let mut initial: BTreeMap<&str, BTreeSet<Term>> = BTreeMap::new();
    for r in spec.roles() {
        let init = initial_knowledge(spec, &r.name);
        let known = saturate(&init, &ctx);
        initial.insert(&r.name, init);
        states.insert(
            r.name.clone(),
            vec![KnowledgeState {
                role: r.name.clone(),
                at_step: 0,
                known,
            }],
        );
    }
    let current = |states: &BTreeMap<String, Vec<KnowledgeState>>, r: &str| {
        states[r].last().expect("every role has a state").known.clone()
    };

    let mut violations = Vec::new();
    for step in spec.exchange() {
        let sender = current(&states, &step.from);
        if !derivable(&sender, &step.payload, &ctx) {
            let missing = missing_subterm(&sender, &step.payload, &ctx)
                .unwrap_or_else(|| step.payload.clone());
            violations.push(StepViolation {
                step_index: step.index,
                role: step.from.clone(),
                code: Code::NotConstructible,
                explanation: format!(
                    "`{}` cannot construct `{missing}` for message {}",
                    step.from, step.index
                ),
                missing_term: missing,
            });
        }
        for (name, history) in states.iter_mut() {
            let mut known = history.last().expect("every role has a state").known.clone();
            if *name == step.to {
                known.insert(step.payload.clone());
                known = saturate(&known, &ctx);
            }
            history.push(KnowledgeState {
                role: name.clone(),
                at_step: step.index,
                known,
            });
        }
    }

    for (pos, step) in spec.exchange().iter().enumerate() {
        if step.delivery != Delivery::Atomic {
            continue;
        }
        let history = &states[&step.to];
        let at_receipt = &history[pos + 1].known;
        let last = &history.last().expect("every role has a state").known;
        let mut others = initial[step.to.as_str()].clone();
        others.extend(
            spec.exchange()
                .iter()
                .filter(|s| s.to == step.to && s.index != step.index)
                .map(|s| s.payload.clone()),
        );
        let others = saturate(&others, &ctx);
        let late = subterms(&ctx.normalize(&step.payload))
            .into_iter()
            .find(|s| !at_receipt.contains(s) && last.contains(s) && !derivable(&others, s, &ctx));
        if let Some(s) = late {
            violations.push(StepViolation {
                step_index: step.index,
                role: step.to.clone(),
                code: Code::AtomicUndecomposable,
                explanation: format!(
                    "`{}` receives message {} atomically but can only extract `{s}` after a later message",
                    step.to, step.index
                ),
                missing_term: s,
            });
        }
    }
    violations.sort_by_key(|v| (v.step_index, v.code));
    Trace { states, violations }
}

/// Simulates the exchange in index order and checks that every sender can
/// build its payload.
pub fn check_executability(spec: &ProtocolSpec) -> ExecutabilityReport {
    let Trace { states, violations } = trace(spec);
    let final_knowledge = states
        .into_iter()
        .map(|(name, mut history)| {
            let last = history.pop().expect("every role has a state");
            (name, last)
        })
        .collect();
    ExecutabilityReport {
        ok: violations.is_empty(),
        violations,
        final_knowledge,
    }
}

/// Each goal term must be known to the role stating the goal (and, for
/// agreement, to the peer) at the end of the run. This says nothing about
/// security.
pub fn check_goals(spec: &ProtocolSpec, report: &ExecutabilityReport) -> Vec<Diagnostic> {
    check_goals_located(spec, report, &|_| None)
}

pub fn check_goals_located(
    spec: &ProtocolSpec,
    report: &ExecutabilityReport,
    locate: &dyn Fn(Site) -> Option<Location>,
) -> Vec<Diagnostic> {
    let ctx = Context::for_spec(spec);
    let mut out = Vec::new();
    for (gi, goal) in spec.goals().iter().enumerate() {
        let (roles, terms): (Vec<&String>, Vec<&Term>) = match goal {
            SecurityGoal::Secrecy { term, viewpoint } => (vec![viewpoint], vec![term]),
            SecurityGoal::Agreement {
                claimer,
                peer,
                terms,
            } => (vec![claimer, peer], terms.iter().collect()),
        };
        for role in roles {
            let Some(state) = report.final_knowledge.get(role) else {
                continue;
            };
            for t in &terms {
                if !derivable(&state.known, t, &ctx) {
                    out.push(
                        Diagnostic::error(
                            Code::GoalUnknown,
                            format!("goal term `{t}` is not known to `{role}` at the end of the run"),
                        )
                        .at(locate(Site::Goal(gi))),
                    );
                }
            }
        }
    }
    out
}

/// Unoriented user equations take no part in derivability.
pub fn equation_warnings(
    spec: &ProtocolSpec,
    locate: &dyn Fn(Site) -> Option<Location>,
) -> Vec<Diagnostic> {
    spec.equations()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.orientation() == Orientation::Unoriented)
        .map(|(i, e)| {
            Diagnostic::warning(
                Code::UnorientedIgnored,
                format!(
                    "unoriented equation `{} = {}` is ignored by the executability check",
                    e.lhs(),
                    e.rhs()
                ),
            )
            .at(locate(Site::Equation(i)))
        })
        .collect()
}
