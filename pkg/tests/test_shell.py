import pytest

from mbrx.shell import ShellParseError, tokenize_command


class TestTokenize:
    def test_simple_command(self):
        assert tokenize_command("ls -la /tmp") == ["ls", "-la", "/tmp"]

    def test_pipeline(self):
        assert tokenize_command("cat a.txt | head -5") == ["cat", "a.txt", "|", "head", "-5"]

    def test_quoted_arguments(self):
        assert tokenize_command('echo "hello world"') == ["echo", "hello world"]

    def test_redirection(self):
        assert tokenize_command("sort < in.txt > out.txt") == [
            "sort", "<", "in.txt", ">", "out.txt"
        ]

    def test_subshell(self):
        assert tokenize_command("(cd /tmp && ls)") == ["(", "cd", "/tmp", "&&", "ls", ")"]


class TestRejections:
    @pytest.mark.parametrize(
        "command",
        [
            "ls |",
            "| ls",
            "ls && && ls",
            "ls >",
            'echo "unterminated',
            "",
            "   ",
            "(ls",
            "ls)",
            "()",
            "ls || | cat",
        ],
    )
    def test_malformed_commands(self, command):
        with pytest.raises(ShellParseError):
            tokenize_command(command)

    def test_trailing_semicolon_allowed(self):
        assert tokenize_command("ls ;") == ["ls", ";"]

    def test_background_allowed(self):
        assert tokenize_command("sleep 5 &") == ["sleep", "5", "&"]
