//! Normal CDF and quantile values from 50-digit mpmath evaluation.

pub const CDF: &[(f64, f64)] = &[
    (-10.0, 7.619853024160525e-24),
    (-9.75, 9.223413524939418e-23),
    (-9.5, 1.0494515075362608e-21),
    (-9.25, 1.1224633591327982e-20),
    (-9.0, 1.1285884059538405e-19),
    (-8.75, 1.0667637375474858e-18),
    (-8.5, 9.479534822203318e-18),
    (-8.25, 7.919726314642477e-17),
    (-8.0, 6.220960574271784e-16),
    (-7.75, 4.5946274357785954e-15),
    (-7.5, 3.1908916729108963e-14),
    (-7.25, 2.0838581586720695e-13),
    (-7.0, 1.279812543885835e-12),
    (-6.75, 7.392257778017822e-12),
    (-6.5, 4.016000583859118e-11),
    (-6.25, 2.0522634252189388e-10),
    (-6.0, 9.86587645037698e-10),
    (-5.75, 4.462172453901612e-09),
    (-5.5, 1.8989562465887718e-08),
    (-5.25, 7.604960516488715e-08),
    (-5.0, 2.866515718791939e-07),
    (-4.75, 1.0170832425687032e-06),
    (-4.5, 3.3976731247300603e-06),
    (-4.25, 1.068852577493442e-05),
    (-4.0, 3.1671241833119924e-05),
    (-3.75, 8.841728520080387e-05),
    (-3.5, 0.00023262907903552504),
    (-3.25, 0.000577025042390767),
    (-3.0, 0.0013498980316300946),
    (-2.75, 0.002979763235054557),
    (-2.5, 0.006209665325776135),
    (-2.25, 0.012224472655044703),
    (-2.0, 0.02275013194817921),
    (-1.75, 0.04005915686381709),
    (-1.5, 0.06680720126885807),
    (-1.25, 0.10564977366685525),
    (-1.0, 0.15865525393145705),
    (-0.75, 0.2266273523768682),
    (-0.5, 0.3085375387259869),
    (-0.25, 0.4012936743170763),
    (0.0, 0.5),
    (0.25, 0.5987063256829237),
    (0.5, 0.6914624612740131),
    (0.75, 0.7733726476231318),
    (1.0, 0.8413447460685429),
    (1.25, 0.8943502263331448),
    (1.5, 0.9331927987311419),
    (1.75, 0.9599408431361829),
    (2.0, 0.9772498680518208),
    (2.25, 0.9877755273449553),
    (2.5, 0.9937903346742238),
    (2.75, 0.9970202367649454),
    (3.0, 0.9986501019683699),
    (3.25, 0.9994229749576092),
    (3.5, 0.9997673709209645),
    (3.75, 0.9999115827147992),
    (4.0, 0.9999683287581669),
    (4.25, 0.9999893114742251),
    (4.5, 0.9999966023268753),
    (4.75, 0.9999989829167575),
    (5.0, 0.9999997133484281),
    (5.25, 0.9999999239503948),
    (5.5, 0.9999999810104375),
    (5.75, 0.9999999955378276),
    (6.0, 0.9999999990134123),
    (6.25, 0.9999999997947736),
    (6.5, 0.99999999995984),
    (6.75, 0.9999999999926077),
    (7.0, 0.9999999999987201),
    (7.25, 0.9999999999997916),
    (7.5, 0.9999999999999681),
    (7.75, 0.9999999999999954),
    (8.0, 0.9999999999999993),
    (8.25, 0.9999999999999999),
    (8.5, 1.0),
    (8.75, 1.0),
    (9.0, 1.0),
    (9.25, 1.0),
    (9.5, 1.0),
    (9.75, 1.0),
    (10.0, 1.0),
];

pub const QUANTILE: &[(f64, f64)] = &[
    (1e-300, -37.0470962993612),
    (1e-100, -21.273453560965326),
    (1e-20, -9.262340089798407),
    (1e-10, -6.361340902404057),
    (1e-06, -4.753424308822899),
    (0.0001, -3.7190164854556804),
    (0.001, -3.0902323061678136),
    (0.01, -2.326347874040841),
    (0.025, -1.9599639845400543),
    (0.05, -1.6448536269514726),
    (0.1, -1.2815515655446004),
    (0.2, -0.8416212335729142),
    (0.25, -0.6744897501960817),
    (0.3, -0.5244005127080408),
    (0.4, -0.2533471031357997),
    (0.45, -0.12566134685507402),
    (0.5, 0.0),
    (0.55, 0.12566134685507416),
    (0.6, 0.2533471031357997),
    (0.7, 0.5244005127080407),
    (0.75, 0.6744897501960817),
    (0.8, 0.8416212335729144),
    (0.9, 1.2815515655446006),
    (0.95, 1.6448536269514722),
    (0.975, 1.9599639845400538),
    (0.99, 2.3263478740408408),
    (0.999, 3.090232306167813),
    (0.9999, 3.7190164854557084),
    (0.999999, 4.753424308817087),
    (0.9999999999, 6.361340889697422),
];
