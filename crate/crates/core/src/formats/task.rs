use serde::{Deserialize, Serialize};

use super::{check_schema, to_toml, toml_error};
use crate::error::{Error, Result};
use crate::task::{ActionType, PrecedenceRule, TaskSpec};

pub const TASK_SCHEMA: &str = "assembly-task/1";

const KIND: &str = "task file";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    schema: String,
    task_id: String,
    total_steps: usize,
    #[serde(rename = "action")]
    actions: Vec<ActionEntry>,
    #[serde(rename = "precedence", default, skip_serializing_if = "Vec::is_empty")]
    precedence: Vec<PrecedenceEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionEntry {
    id: usize,
    label: String,
    part: String,
    tool: String,
    repeat: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrecedenceEntry {
    before: usize,
    after: usize,
}

pub fn parse_task(text: &str) -> Result<TaskSpec> {
    let file: TaskFile = toml::from_str(text).map_err(|e| toml_error(KIND, e))?;
    check_schema(KIND, &file.schema, TASK_SCHEMA)?;

    let mut parts: Vec<String> = Vec::new();
    let mut tools: Vec<String> = Vec::new();
    let mut actions = Vec::with_capacity(file.actions.len());
    for (i, entry) in file.actions.into_iter().enumerate() {
        if entry.id != i {
            return Err(Error::format(
                format!("{KIND}: action[{i}].id"),
                format!("ids must be listed densely from 0; found {}", entry.id),
            ));
        }
        if entry.repeat == 0 {
            return Err(Error::format(
                format!("{KIND}: action[{i}].repeat"),
                "must be at least 1",
            ));
        }
        let part_id = intern(&mut parts, entry.part);
        let tool_id = intern(&mut tools, entry.tool);
        actions.push(ActionType {
            id: entry.id,
            label: entry.label,
            part_id,
            tool_id,
            repeat_count: entry.repeat,
        });
    }
    let sum: usize = actions.iter().map(|a| a.repeat_count as usize).sum();
    if sum != file.total_steps {
        return Err(Error::format(
            format!("{KIND}: field `total_steps`"),
            format!(
                "declared {} but repeat counts sum to {sum}",
                file.total_steps
            ),
        ));
    }
    let precedence = file
        .precedence
        .into_iter()
        .map(|p| PrecedenceRule {
            pred_id: p.before,
            succ_id: p.after,
        })
        .collect();
    TaskSpec::new(file.task_id, actions, precedence, parts, tools)
}

fn intern(names: &mut Vec<String>, name: String) -> usize {
    match names.iter().position(|n| *n == name) {
        Some(i) => i,
        None => {
            names.push(name);
            names.len() - 1
        }
    }
}

pub fn serialize_task(spec: &TaskSpec) -> String {
    let file = TaskFile {
        schema: TASK_SCHEMA.to_string(),
        task_id: spec.task_id().to_string(),
        total_steps: spec.total_steps(),
        actions: spec
            .actions()
            .iter()
            .map(|a| ActionEntry {
                id: a.id,
                label: a.label.clone(),
                part: spec.parts()[a.part_id].clone(),
                tool: spec.tools()[a.tool_id].clone(),
                repeat: a.repeat_count,
            })
            .collect(),
        precedence: spec
            .precedence()
            .iter()
            .map(|r| PrecedenceEntry {
                before: r.pred_id,
                after: r.succ_id,
            })
            .collect(),
    };
    to_toml(&file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shipped;

    #[test]
    fn shipped_canonical_task() {
        let spec = shipped::canonical_task();
        assert_eq!(spec.num_actions(), 6);
        assert_eq!(spec.total_steps(), 6);
        let screwdriver = spec
            .tools()
            .iter()
            .position(|t| t == "screwdriver")
            .unwrap();
        let users: Vec<_> = spec
            .actions()
            .iter()
            .filter(|a| a.tool_id == screwdriver)
            .map(|a| a.id)
            .collect();
        assert_eq!(users, vec![3, 4]);
        assert_eq!(spec.parts().len(), 2);
        for part in 0..2 {
            assert!(spec.actions().iter().filter(|a| a.part_id == part).count() >= 2);
        }
    }

    #[test]
    fn shipped_actual_task() {
        let spec = shipped::actual_task();
        assert_eq!(spec.num_actions(), 8);
        assert_eq!(spec.total_steps(), 17);
        assert_eq!(spec.actions()[6].repeat_count, 4);
        assert!(spec.precedence().contains(&PrecedenceRule {
            pred_id: 2,
            succ_id: 4
        }));
    }

    #[test]
    fn cycle_is_rejected() {
        let text = r#"
schema = "assembly-task/1"
task_id = "cyc"
total_steps = 3

[[action]]
id = 0
label = "a"
part = "p"
tool = "t"
repeat = 1

[[action]]
id = 1
label = "b"
part = "p"
tool = "t"
repeat = 1

[[action]]
id = 2
label = "c"
part = "p"
tool = "t"
repeat = 1

[[precedence]]
before = 0
after = 1

[[precedence]]
before = 1
after = 0
"#;
        assert_eq!(
            parse_task(text).unwrap_err(),
            Error::PrecedenceCycle(vec![0, 1])
        );
    }

    #[test]
    fn declared_steps_must_match() {
        let text = shipped::CANONICAL_TASK.replace("total_steps = 6", "total_steps = 7");
        let err = parse_task(&text).unwrap_err();
        assert!(err.to_string().contains("total_steps"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected_with_location() {
        let text = shipped::CANONICAL_TASK.replace("repeat = 1\n", "repeat = 1\ncolor = \"red\"\n");
        let err = parse_task(&text).unwrap_err().to_string();
        assert!(err.contains("color"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn wrong_schema() {
        let text = shipped::CANONICAL_TASK.replace("assembly-task/1", "assembly-task/9");
        assert!(parse_task(&text)
            .unwrap_err()
            .to_string()
            .contains("schema"));
    }
}
