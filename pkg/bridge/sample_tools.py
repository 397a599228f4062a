"""Sample tool module served by the stdio bridge."""


def echo(text: str) -> str:
    """Return the input text unchanged."""
    return text


def search(query: str) -> str:
    """Search a small fixed index. The query must stay under 100 characters."""
    assert len(query) < 100, "Query is too long. Query must be less than 100 characters."
    return f"results for: {query}"
