"""Documentation topical alignment toolkit."""
