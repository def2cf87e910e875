from graphperc.harness.cli import main

raise SystemExit(main())
