use adversim_agents::prompts::MINOR_ONLY_CLAUSE;
use adversim_agents::{
    function_init, function_modi, function_refl, AgentError, ChatClient, ClientError, DeterministicMock, Memory,
    Message,
};
use adversim_core::identifier::ScoreProgram;

/// Records every request before delegating.
struct Recorder<C> {
    inner: C,
    seen: Vec<Vec<Message>>,
}

impl<C: ChatClient> ChatClient for Recorder<C> {
    fn send(&mut self, messages: &[Message], t: f64) -> Result<String, ClientError> {
        self.seen.push(messages.to_vec());
        self.inner.send(messages, t)
    }
}

fn rec(replies: &[&str]) -> Recorder<DeterministicMock> {
    Recorder {
        inner: DeterministicMock::scripted(replies.iter().copied()),
        seen: Vec::new(),
    }
}

fn fenced(src: &str) -> String {
    format!("Here it is.\n```dsl\n{src}\n```\n")
}

fn prog(s: &str) -> ScoreProgram {
    ScoreProgram::parse(s).unwrap()
}

#[test]
fn init_passes_the_program_through() {
    let mut c = rec(&[&fenced("1.0/max(ttc,0.5)")]);
    let p = function_init(&mut c).unwrap();
    assert_eq!(p.ast, prog("1.0/max(ttc,0.5)").ast);
    assert_eq!(c.seen.len(), 1);
    assert!(c.seen[0][1].content.starts_with("Stage: initialization"));
}

#[test]
fn init_retries_with_the_error_appended() {
    let mut c = rec(&["no idea", &fenced("dist")]);
    assert_eq!(function_init(&mut c).unwrap().pretty(), "dist");
    assert_eq!(c.seen.len(), 2);
    let retry = &c.seen[1];
    assert_eq!(retry.len(), 4);
    assert!(retry[3].content.contains("no fenced code block"));
}

#[test]
fn init_gives_up_after_three_bad_replies() {
    let mut c = rec(&["```dsl\ndist +\n```"]);
    match function_init(&mut c) {
        Err(AgentError::Generation { attempts: 3, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(c.seen.len(), 3);
}

#[test]
fn reflection_prompt_sections() {
    let f = prog("2*dist");
    let mut c = rec(&["<suggestion>more</suggestion>"]);
    function_refl(&mut c, &Memory::default(), &f, 0.4, false).unwrap();
    let p = &c.seen[0][1].content;
    assert!(!p.contains("Previous functions"));
    assert!(p.contains("Success rate: 0.4000"));
    assert!(p.contains("2 * dist"));
    assert!(!p.contains(MINOR_ONLY_CLAUSE));

    let mut memory = Memory::default();
    memory.push(&prog("speed"), 0.35);
    memory.push(&prog("exp(-ttc)"), 0.5);
    function_refl(&mut c, &memory, &f, 0.55, true).unwrap();
    let p = &c.seen[1][1].content;
    assert!(p.contains("Function 0 (success rate 0.3500):\n```dsl\nspeed\n```"));
    assert!(p.contains("Function 1 (success rate 0.5000):\n```dsl\nexp(-ttc)\n```"));
    assert!(p.contains(MINOR_ONLY_CLAUSE));
}

#[test]
fn coefficient_only_edit_is_accepted() {
    let mut c = rec(&[&fenced("3.5*dist")]);
    let p = function_modi(&mut c, &prog("2.0*dist"), "raise it", true).unwrap();
    assert_eq!(p.ast.literals(), vec![3.5]);
    assert!(c.seen[0][1].content.contains(MINOR_ONLY_CLAUSE));
    assert!(c.seen[0][1].content.contains("<suggestion>raise it</suggestion>"));
}

#[test]
fn structural_edit_is_rejected_when_minor_only() {
    let mut c = rec(&[&fenced("dist + speed")]);
    match function_modi(&mut c, &prog("dist"), "add speed", true) {
        Err(AgentError::StructureViolation { expected, found }) => {
            assert_eq!(expected, prog("dist").structure_hash);
            assert_eq!(found, prog("dist + speed").structure_hash);
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(c.seen.len(), 3);

    let mut c = rec(&[&fenced("dist + speed")]);
    assert_eq!(function_modi(&mut c, &prog("dist"), "add speed", false).unwrap().pretty(), "dist + speed");
}

#[test]
fn structural_edit_recovers_on_retry() {
    let mut c = rec(&[&fenced("dist + 1"), &fenced("0.5*dist")]);
    let p = function_modi(&mut c, &prog("2*dist"), "halve", true).unwrap();
    assert_eq!(p.ast.literals(), vec![0.5]);
    assert_eq!(c.seen.len(), 2);
}
