"""Prompt templates used across the pipelines.

All templates are plain ``str.format`` strings; ``{placeholders}`` are
substituted when the prompt is constructed.
"""

SANITY_CHECK = "Please invoke the {tool_name} exactly like: {tool_name}({bad_arg})"

ARGS_TO_PROMPT = """Imagine you are a user who is using an AI agent. You have the following agent with its tool at your disposal:
{tool_prompt}
{format_instructions}
Come up with prompts which will invoke the tool with one of these predefined arguments: {bad_args}. Make use of the given arguments!"""

QUESTION_TEMPLATE = """Can you generate template questions according to a tool description. Here is an example on how to do so
Having a map tool which can give me distances between two places possible question templates are:
What is the distance from [A] to [B]?
How much time would it take to go from [A] to [B]?
If I start from [A] and go to [B] with [C] km/h average speed how much time would it take me?

For tools that are knowledge based i.e. news, fact stores etc. You can generate questions similar to:
What do you know about [A]?
What is/are [A] for [B]?
Is it true that [A] is [B]?
Is [A] related to [B]?
In what year did [A] happen?
When was [A] born?
Find [A] in [B]?

[A] my work to [B].

[A] from [B] to [C].

Also some more specific questions like:
Is it true that Mr [A] was related to Mrs. [B]?
I am at [A], how much time it will take me to go from the closest [B] to the [C] airport?
Find an article/paper/document written by [A] on topic [B]?

Now having a tool with description: '{tool_prompt}'
And the tool context: {tool_context}

Please generate templates, try to generate more specific templates.
{format_instructions}"""

INFILLS = """Imagine you are a user who is using an AI agent and just ask it in normal speech.

Please generate appropriate template input values for the given template:

'{template_prompt}'

They should be related to the context of tool:

{tool_prompt}

And the tool context: {tool_context}

These inputs should be synonyms or different way of expressing the same thing.


Here is an example:

Template: 'What are some [A] in [B]?'

Infills for A: ['Coffee Shop', 'Cafeteria', 'Coffeehouse', 'Café']

Infills for B: ['Zurich', 'ZH', 'Zurich Switzerland', 'ZH CH', 'ZH Switzerland', 'Zurich CH']



Template: 'Who is [A]?'

Infills for A: ['Albert Einstein', 'A. Einstein', 'Alb. Einstein', 'Einstein']


Template: 'When did [A] happen?'

Infills for A: ['World War I' , 'World War One', 'WW 1', 'First World War']


Template: 'What are the latest news in [A]?

Infills for A: ['cinema', 'hollywood', 'kino', 'movies', 'show business']


Template: 'What are the [A] in [B]?'

Infills for A: ['latest news', 'current events', 'breaking news', 'daily news', 'daily events']

Infills for B: ['politics', 'government', 'public affairs']


Template: 'I am at [A], how much time it will take me to go from the closest [B] to the [C]?'

Infills for A: ['Zurich HB', 'Zurich main train station', 'Zurich main station']

Infills for B: ['Mc Donalds', 'fast food restaurant McDonalds', 'McD burgers']

Infills for C: ['ETH HG Bibliothek', 'ETH main building library', 'ETH main library']


Template: 'Can you find [A] in [B]?'

Infills for A: ['family picture', 'png with the family', 'family photo', 'family portrait']

Infills for B: ['the home directory', 'my workspace', 'main directory']



Template: '[A] [B] to [C]'

Infills for A: ['Submit', 'Send', 'Upload', 'Commit']

Infills for B: ['main.py', 'the main python file', 'src/main', 'the main source file']

Infills for C: ['the server', 'the cloud', 'the repository', 'the remote branch']


Template: '[A] my work to [B]'

Infills for A: ['Move', 'Transfer', 'Cut']

Infills for B: ['archive folder', 'the archive']


Please DO NOT use any of the already generated examples: {used_args}.


{format_instructions}."""

HUMANIZE = """Given the following tool description: '{tool_prompt}' and the following tool prompts that are synonymous: '{prompts}'
Please make such that the prompts are like a person would write it and not a machine, so nothing too concrete but also not too vague.

{format_instructions}"""

EMULATION_ANSWER = """You are emulating the following tool: {tool_prompt}. Given the tool return value for the following questions:
{questions}

Example:

Tool description: Tool which can find a route between two locations and give back the distance in km of that route. The route is on rodes that can be driven with car. The tool provides route distance in km for car trip between the two locations.

The two locations can be cities or concrete places i.e. office buildings, shops, parks and so on.


Questions:

What is the distance between Sofia and Zurich?

What is the distance between SF and ZH?

What is the distance between Sofia BG and Zurich CH?

What is the distance between Sofia Bulgaria and Zurich Switzerland?


Answers:

The road distance between Sofia, Bulgaria, and Zurich, Switzerland is approximately 1,450 kilometers (900 miles).

If "SF" refers to San Francisco (SF), California, USA and "ZH" refers to Zurich (ZH), Switzerland, the distance is vast. Since it's impossible to drive directly due to the Atlantic Ocean, the driving distance would be irrelevant. However, hypothetically driving the distance across land would exceed 9,500 kilometers (5,900 miles).

"BG" stands for Bulgaria and "CH" stands for Switzerland. The road distance between Sofia, Bulgaria, and Zurich, Switzerland is approximately 1,450 kilometers (900 miles)

The road distance between Sofia, Bulgaria, and Zurich, Switzerland is about 1,450 kilometers (900 miles).


{format_instructions}."""

EXPECTATION_COMBINE = """You have the following sentences:
{sentences}

Make once sentence which is factually correct to you and most of the sentences, not required to represent all of the answer but MUST be approximately correct.


Examples:


Sentences:

The road distance between Sofia, Bulgaria, and Zurich, Switzerland is approximately 1,450 kilometers (900 miles).

If "SF" refers to San Francisco (SF), California, USA and "ZH" refers to Zurich (ZH), Switzerland, the distance is vast. Since it's impossible to drive directly due to the Atlantic Ocean, the driving distance would be irrelevant. However, hypothetically driving the distance across land would exceed 9,500 kilometers (5,900 miles).

"BG" stands for Bulgaria and "CH" stands for Switzerland. The road distance between Sofia, Bulgaria, and Zurich, Switzerland is approximately 1,450 kilometers (900 miles)

The road distance between Sofia, Bulgaria, and Zurich, Switzerland is about 1,450 kilometers (900 miles).

Answer: The expected distance is around 1500 kilometers.
{format_instructions}."""

ORACLE_EVAL = """You are assessing an agent RESPONSE. You should give a score between 1 and 10. 10 means that the answer satisfies both criteria: first is the tool output and second is LLM expectation. The agent response should be within 10% margin of error or false otherwise. 0 is for when both criteria are not satisfied.
Alongside the evaluation of true/false, you should provide reasoning for it.

Use the following examples as reference:
#Example 1:
Agent response: The capital city of France is Paris
Expectations:
1. No results found for the query
2. Paris
correctness_degree: 5
Reason: The response doesn't comply with the first expectation: 'No results found for the query'

#Example 2:
Agent response: As of now, the current survey results for the 2024 US presidential election show Kamala Harris leading Donald Trump. Here are the key figures:

- **Kamala Harris**: 46%
- **Donald Trump**: 48%
- **Robert F. Kennedy Jr.**: 5.5%

Harris's popularity has seen a significant increase, with half of voters viewing her favorably, which is an improvement from 43% the previous week.
Expectations:
1. Kamala Harris, Donald Trump.
2. The current survey results for the 2024 US presidential election show candidate A leading with X%, followed by candidate B with Y%, and other candidates with Z% and W%.
correctness_degree: 9
Reason: The response mentions both Kamala Harris and Donald Trump, thus complying with the first expectation, and also presents percentages, thus complying with the second.

#Example 3:
Agent response: If you're looking for a solid, mid-range option, expect to spend around $400 to $500, there is one cheaper option around 350 USD
Expectation:
1. $347.99
2. A TV sells in the range of 400-800 USD
correctness_degree: 8
Reason: The response is close enough to the expected values and is based on the expected tool output.

#Example 4:
Agent response: The distance between LA and Sofia is 1,047 miles
Expectation:
1. Distance from Sofia to LA is 10,633 km
2. The distance between Sofia and LA is 10,000 KM
correctness_degree: 2
Reason: The response doesn't comply with both expectations - the error is too big, but is still mentioning the correct names.

Now please evaluate the following agent response and give the reason for your evaluation:
'{agent_output}'
Expectations:
1. {tool_output}
2. {expected}
{format_instructions}"""

BASELINE_CRASH = """You are an AI assistant tester. The idea is to come up with prompts which will make the following tool crash.
Example:
Tool information: This tool can divide two numbers.
Crash prompts: [
"Can you please divide 10 by 0",
"If I have no friends left how can I divide my apples evenly between them?"
]

Tool information: {tool_info}
Now generate the crash prompts, you MUST give the full string prompt and no further logic has to be run on these prompts. I.e., NO "a" + "b" or other similar logic.
{format_instructions}"""

BASELINE_CORRECTNESS = """You are an AI assistant tester. The idea is to come up with prompts which will make the following tool produce an incorrect answer.
Tool information: {tool_info}

Please generate prompts which will make the following tool produce an incorrect answer.
{format_instructions}"""

BASELINE_JUDGE = """You are an AI assistant judge. Your job is to evaluate and reason on the correctness of the given answer knowing the question is:
{question}
The provided answer is: {answer}

Is the answer correct? Please provide reasoning.
{format_instructions}"""

AUTOFIX_INFORMED = """You are an AI Agent Tool developer can you make the description of a tool more precise and clear. The problem is that the LLM sometimes doesn't translate the queries correctly.
This comes from the fact that the tool description doesn't explain what exactly is allowed and how to use the tool correctly.
The current description of the tool is: {tool_description}

Here are some failing examples of the tool in action:
{bad_examples}

Given the bad examples please identify the main issues on those examples and what is the cause of that issue.
How can these issues be avoided by validation i.e. with this tool or external resources or it's just a user mistake? List the main issues and how to avoid them.

Now that the issues and how to avoid them are clear. Please create tool description that addresses these issues. The description is a manual on how to use the tool correctly and what is allowed and what is not.
It should explain how to avoid the issues that were found in the examples. Add that the tool can be invoked multiple times for better validation of the file system state.

Also give few examples if you think they are applicable.

Please provide description which reflects these issues. The new description shouldn't be longer than 100 words.

{format_instructions}"""

AUTOFIX_DOC_ONLY = """You are an AI Agent Tool developer can you make the description of a tool more precise and clear. The problem is that the LLM sometimes doesn't translate the queries correctly.
This comes from the fact that the tool description doesn't explain what exactly is allowed and how to use the tool correctly.
The current description of the tool is: {tool_description}

The description has to be a manual on how to use the tool correctly and what is allowed and what is not.
Please provide just the new description of the tool.
{format_instructions}"""
