import pytest

from ctf_vault.config import Config, ConfigError, load_config, parse_listen


def _write(tmp_path, text):
    path = tmp_path / "vault.yaml"
    path.write_text(text, encoding="utf-8")
    return path


FULL = """\
archive:
  root: /srv/ctf/archive
data:
  dir: /srv/ctf/data
runtime:
  driver: oci
server:
  listen: 0.0.0.0:9000
auth:
  tokens:
    tok-a: alice
    tok-b: bob
"""


def test_load_full_config(tmp_path):
    cfg = load_config(_write(tmp_path, FULL))
    assert str(cfg.archive_root) == "/srv/ctf/archive"
    assert str(cfg.data_dir) == "/srv/ctf/data"
    assert cfg.runtime_driver == "oci"
    assert cfg.server_listen == "0.0.0.0:9000"
    assert cfg.auth_tokens == {"tok-a": "alice", "tok-b": "bob"}


def test_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, "archive:\n  root: /a\ndata:\n  dir: /d\n"))
    assert cfg.runtime_driver == "local"
    assert cfg.server_listen == "127.0.0.1:8000"
    assert cfg.auth_tokens == {}


@pytest.mark.parametrize(
    "text",
    [
        "data:\n  dir: /d\n",  # archive.root missing
        "archive:\n  root: /a\n",  # data.dir missing
        "archive:\n  root: /a\ndata:\n  dir: /d\nruntime:\n  driver: vmware\n",
        "archive:\n  root: /a\ndata:\n  dir: /d\nserver:\n  listen: nocolon\n",
        "archive:\n  root: /a\ndata:\n  dir: /d\nserver:\n  listen: h:99999\n",
        "archive:\n  root: /a\ndata:\n  dir: /d\nextra:\n  x: 1\n",
        "archive:\n  root: /a\ndata:\n  dir: /d\nauth:\n  tokens: [a, b]\n",
        "- just\n- a\n- list\n",
    ],
)
def test_rejects_bad_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_parse_listen():
    assert parse_listen("127.0.0.1:8000") == ("127.0.0.1", 8000)
    assert parse_listen("0.0.0.0:80") == ("0.0.0.0", 80)
    with pytest.raises(ConfigError):
        parse_listen("8000")
    with pytest.raises(ConfigError):
        parse_listen("host:0")


def test_config_is_frozen():
    cfg = Config(archive_root="/a", data_dir="/d")
    with pytest.raises(AttributeError):
        cfg.runtime_driver = "oci"
