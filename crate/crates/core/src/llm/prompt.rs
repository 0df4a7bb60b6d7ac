use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::GRAMMAR;
use crate::lipschitz::LipschitzArray;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// First-iteration sampling prompt.
    Initial,
    /// Request to analyze one iteration's results.
    Feedback,
    /// Later-iteration sampling prompt carrying the history so far.
    Subsequent,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Initial => "initial",
            TemplateId::Feedback => "feedback",
            TemplateId::Subsequent => "subsequent",
        }
    }

    fn body(self) -> &'static str {
        match self {
            TemplateId::Initial => INITIAL,
            TemplateId::Feedback => FEEDBACK,
            TemplateId::Subsequent => SUBSEQUENT,
        }
    }
}

/// Values substituted into a template. Each template reads a subset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptVars {
    pub task_description: Option<String>,
    pub total_dim: Option<usize>,
    pub detail_content: Option<String>,
    pub sample_count: Option<usize>,
    pub iteration_results: Option<String>,
    pub former_history: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template: TemplateId,
    pub system: String,
    pub user: String,
    pub vars: PromptVars,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template `{template}` needs variable `{name}`")]
    MissingVariable {
        template: &'static str,
        name: &'static str,
    },
}

pub const SYSTEM_MESSAGE: &str =
    "You design state features and intrinsic rewards for reinforcement \
learning agents. You answer with programs in the expression language described in the request.";

const SEPARATOR: &str = "=========================================================";

const INITIAL: &str = "\
Revise the state representation for a reinforcement learning agent.
{{separator}}
Task description:
{{task_description}}
{{separator}}

The current state is a {{total_dim}}-dimensional real vector, written `s`.

Meaning of each dimension of `s`:
{{detail_content}}

Design a task-related state representation computed from the {{total_dim}} source dimensions, \
using the information above. Any amount of calculation is welcome. The new values are appended \
to the source state.

Also design an intrinsic reward computed from the updated state.

Concretely, we will:
1. compute the updated state `updated_s = (s, repr(s))`
2. compute an intrinsic reward `r = reward(updated_s)`
3. the reward may read source dimensions `s[0]` to `s[{{last_source_dim}}]`
4. the reward must read at least one added dimension, `s[{{total_dim}}]` or beyond

{{dsl_instructions}}
";

const FEEDBACK: &str = "\
We trained {{sample_count}} reinforcement learning policies, one for each pair of state \
representation program and intrinsic reward program you proposed.

For every pair we recorded:
1. the final policy performance (accumulated extrinsic reward, or success rate on sparse tasks)
2. the Lipschitz constant of the reward with respect to every dimension of the updated state. \
A small constant means the reward changes smoothly along that dimension; a large one means the \
dimension relates to the reward in a jagged way. Raw values are listed with a min-max normalized \
companion column.

Results:
{{iteration_results}}

Analyze these results and suggest how to improve the state representation program.

Hints for the analysis:
(a) for a pair with very low performance, work out why it failed
(b) for dimensions with a very large Lipschitz constant, work out what makes them jagged
(c) say how both the representation program and the reward program could be improved next

Think step by step. The aim is the best possible final policy.
";

const SUBSEQUENT: &str = "\
Revise the state representation for a reinforcement learning agent.
{{separator}}
Task description:
{{task_description}}
{{separator}}

The current state is a {{total_dim}}-dimensional real vector, written `s`.

Meaning of each dimension of `s`:
{{detail_content}}

Design a task-related state representation computed from the {{total_dim}} source dimensions, \
using the information above. Any amount of calculation is welcome. The new values are appended \
to the source state.

Programs tried in earlier iterations, with their results and the suggestions drawn from them:
{{former_history}}

Following those suggestions, propose an improved state representation program and an improved \
intrinsic reward program.

Concretely, we will:
1. compute the updated state `updated_s = (s, repr(s))`
2. compute an intrinsic reward `r = reward(updated_s)`
3. the reward may read source dimensions `s[0]` to `s[{{last_source_dim}}]`
4. the reward must read at least one added dimension, `s[{{total_dim}}]` or beyond

{{dsl_instructions}}
";

fn dsl_instructions() -> String {
    format!(
        "Write both programs in this expression language:\n\
         {GRAMMAR}\n\n\
         The representation program reads `s[0]` to `s[n-1]` of the source state; each `out:` line \
         adds one dimension. The reward program has exactly one `out:` line and reads the updated \
         state.\n\n\
         Think step by step, then give the answer as one fenced block tagged `dsl` with a `repr:` \
         section and a `reward:` section, for example:\n\n\
         ```dsl\n\
         repr:\n\
         out: <expr>\n\
         out: <expr>\n\
         reward:\n\
         out: <expr>\n\
         ```"
    )
}

/// Fills `template` from `vars`.
pub fn build_prompt(template: TemplateId, vars: &PromptVars) -> Result<PromptBundle, PromptError> {
    let missing = |name| PromptError::MissingVariable {
        template: template.as_str(),
        name,
    };
    let mut text = template.body().replace("{{separator}}", SEPARATOR);
    let mut put = |key: &str, value: &str| text = text.replace(&format!("{{{{{key}}}}}"), value);
    match template {
        TemplateId::Initial | TemplateId::Subsequent => {
            let task = vars
                .task_description
                .as_deref()
                .ok_or_else(|| missing("task_description"))?;
            let dim = vars.total_dim.ok_or_else(|| missing("total_dim"))?;
            let detail = vars
                .detail_content
                .as_deref()
                .ok_or_else(|| missing("detail_content"))?;
            if dim == 0 {
                return Err(missing("total_dim"));
            }
            put("task_description", task);
            put("total_dim", &dim.to_string());
            put("last_source_dim", &(dim - 1).to_string());
            put("detail_content", detail);
            put("dsl_instructions", &dsl_instructions());
            if template == TemplateId::Subsequent {
                let history = vars
                    .former_history
                    .as_deref()
                    .ok_or_else(|| missing("former_history"))?;
                put("former_history", history);
            }
        }
        TemplateId::Feedback => {
            let count = vars.sample_count.ok_or_else(|| missing("sample_count"))?;
            let results = vars
                .iteration_results
                .as_deref()
                .ok_or_else(|| missing("iteration_results"))?;
            put("sample_count", &count.to_string());
            put("iteration_results", results);
        }
    }
    debug_assert!(!text.contains("{{"), "unsubstituted placeholder");
    Ok(PromptBundle {
        template,
        system: SYSTEM_MESSAGE.to_string(),
        user: text,
        vars: vars.clone(),
    })
}

/// One candidate's outcome as reported in the feedback prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultEntry {
    pub label: String,
    pub repr_text: String,
    pub reward_text: String,
    /// `None` when the candidate was disqualified.
    pub score: Option<f64>,
    pub lipschitz: Option<LipschitzArray>,
    pub note: Option<String>,
}

/// Renders results as the `iteration_results` block.
pub fn format_iteration_results(entries: &[ResultEntry], source_dim: usize) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("--- {} ---\n", e.label));
        out.push_str("repr:\n");
        push_indented(&mut out, &e.repr_text);
        out.push_str("reward:\n");
        push_indented(&mut out, &e.reward_text);
        match e.score {
            Some(score) => out.push_str(&format!("final policy performance: {score:.4}\n")),
            None => out.push_str("final policy performance: none (disqualified)\n"),
        }
        if let Some(note) = &e.note {
            out.push_str(&format!("note: {note}\n"));
        }
        if let Some(c) = &e.lipschitz {
            out.push_str("Lipschitz constant of the reward per dimension:\n");
            out.push_str("  dim      raw         normalized\n");
            for (i, (raw, norm)) in c.values.iter().zip(c.normalized()).enumerate() {
                let tag = if i < source_dim { "source" } else { "added" };
                out.push_str(&format!("  s[{i}] ({tag})  {raw:.6}  {norm:.4}\n"));
            }
            if c.approximate {
                out.push_str("  (estimated from sampled state pairs)\n");
            }
        }
        out.push('\n');
    }
    out
}

fn push_indented(out: &mut String, text: &str) {
    for line in text.lines() {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
}
