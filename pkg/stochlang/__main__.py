from stochlang.cli import app

app(prog_name="stochlang")
