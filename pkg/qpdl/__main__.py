from qpdl.main import main

main()
