//! The reconstruction prompt and its inverse, used by the mock generators.

const CONTEXT_HEAD: &str = "Context:\n";
const QUERY_HEAD: &str = "\n\nGiven the partial transcript: '";
const INSTRUCTION_TAIL: &str = "', predict what the speaker is most likely saying.";

/// `Context:\n{r1}\n{r2}…\n\nGiven the partial transcript: '{query}', predict what the speaker is most likely saying.`
pub fn assemble_prompt(query: &str, retrieved: &[String]) -> String {
    format!("{CONTEXT_HEAD}{}{QUERY_HEAD}{query}{INSTRUCTION_TAIL}", retrieved.join("\n"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt<'a> {
    pub context: Vec<&'a str>,
    pub query: &'a str,
}

/// Split a prompt built by [`assemble_prompt`] back into its parts.
pub fn parse_prompt(prompt: &str) -> Option<ParsedPrompt<'_>> {
    let body = prompt.strip_prefix(CONTEXT_HEAD)?.strip_suffix(INSTRUCTION_TAIL)?;
    let split = body.rfind(QUERY_HEAD)?;
    let (ctx, rest) = body.split_at(split);
    let query = &rest[QUERY_HEAD.len()..];
    let context = if ctx.is_empty() { Vec::new() } else { ctx.split('\n').collect() };
    Some(ParsedPrompt { context, query })
}
